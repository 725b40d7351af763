#ifndef SCFD_CSV_HPP
#define SCFD_CSV_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfd {

// Fixed-format CSV writer: doubles are printed with %.17g so identical runs
// produce byte-identical files.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    class Row {
    public:
        explicit Row(std::ofstream& out) : out_(&out) {}
        Row& operator<<(double v) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return raw(buf);
        }
        Row& operator<<(int v) { return raw(std::to_string(v)); }
        Row& operator<<(std::int64_t v) { return raw(std::to_string(v)); }
        Row& operator<<(std::size_t v) { return raw(std::to_string(v)); }
        Row& operator<<(const std::string& v) { return raw(v); }
        Row& operator<<(const char* v) { return raw(v); }
        ~Row() { *out_ << "\n"; }

    private:
        Row& raw(const std::string& s) {
            if (count_++) *out_ << ",";
            *out_ << s;
            return *this;
        }
        std::ofstream* out_;
        int count_ = 0;
    };

    Row row() { return Row(out_); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// SHA-1, for the run hash printed in report.txt.
// ---------------------------------------------------------------------------
inline std::string sha1_hex(const std::string& data) {
    auto rotl = [](std::uint32_t x, int k) { return (x << k) | (x >> (32 - k)); };
    std::array<std::uint32_t, 5> h{0x67452301u, 0xEFCDAB89u, 0x98BADCFEu,
                                   0x10325476u, 0xC3D2E1F0u};
    std::string msg = data;
    const std::uint64_t bitlen = static_cast<std::uint64_t>(msg.size()) * 8;
    msg += static_cast<char>(0x80);
    while (msg.size() % 64 != 56) msg += '\0';
    for (int i = 7; i >= 0; --i)
        msg += static_cast<char>((bitlen >> (8 * i)) & 0xff);

    for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
        std::array<std::uint32_t, 80> w{};
        for (int i = 0; i < 16; ++i)
            w[i] = (static_cast<std::uint32_t>(
                        static_cast<unsigned char>(msg[chunk + 4 * i]))
                    << 24) |
                   (static_cast<std::uint32_t>(
                        static_cast<unsigned char>(msg[chunk + 4 * i + 1]))
                    << 16) |
                   (static_cast<std::uint32_t>(
                        static_cast<unsigned char>(msg[chunk + 4 * i + 2]))
                    << 8) |
                   static_cast<std::uint32_t>(
                       static_cast<unsigned char>(msg[chunk + 4 * i + 3]));
        for (int i = 16; i < 80; ++i)
            w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        auto [a, b, c, d, e] = h;
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e;
    }
    char buf[41];
    std::snprintf(buf, sizeof(buf), "%08x%08x%08x%08x%08x", h[0], h[1], h[2],
                  h[3], h[4]);
    return buf;
}

} // namespace scfd

#endif
