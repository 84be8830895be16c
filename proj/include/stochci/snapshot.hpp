#pragma once

#include "stochci/field.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stochci {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

//! Thrown for unreadable or malformed files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

//! Writes bytes to path through a temporary file and rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {
template <typename T>
void put(std::string& s, T v)
{
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    s.append(b, sizeof(T));
}
template <typename T>
T get(const std::string& s, std::size_t& off)
{
    if (off + sizeof(T) > s.size()) throw IoError("snapshot truncated");
    T v;
    std::memcpy(&v, s.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}
} // namespace detail

//! Layout: "WNF1", u32 n, u32 components, f64 time_tag (NaN when absent),
//! then per component the half spectrum in row-major (i, j, k) order as
//! interleaved (re, im) f64.
template <int NC>
std::string encode_snapshot(const SpectralField<NC>& f)
{
    std::string s = "WNF1";
    detail::put<std::uint32_t>(s, std::uint32_t(f.grid.n));
    detail::put<std::uint32_t>(s, std::uint32_t(NC));
    detail::put<double>(s, f.time_tag ? *f.time_tag : std::numeric_limits<double>::quiet_NaN());
    for (int a = 0; a < NC; ++a)
        for (const cplx& z : f.c[a]) {
            detail::put<double>(s, z.real());
            detail::put<double>(s, z.imag());
        }
    return s;
}

template <int NC>
SpectralField<NC> decode_snapshot(const std::string& s)
{
    if (s.size() < 20 || s.compare(0, 4, "WNF1") != 0) throw IoError("not a WNF1 snapshot");
    std::size_t off = 4;
    auto n = detail::get<std::uint32_t>(s, off);
    auto nc = detail::get<std::uint32_t>(s, off);
    double tt = detail::get<double>(s, off);
    if (nc != std::uint32_t(NC)) throw IoError("snapshot has " + std::to_string(nc) + " components, expected " + std::to_string(NC));
    SpectralField<NC> f{Grid3(int(n))};
    if (!std::isnan(tt)) f.time_tag = tt;
    for (int a = 0; a < NC; ++a)
        for (cplx& z : f.c[a]) {
            double re = detail::get<double>(s, off);
            double im = detail::get<double>(s, off);
            z = cplx(re, im);
        }
    if (off != s.size()) throw IoError("snapshot has trailing bytes");
    return f;
}

//! Component count stored in a snapshot header.
inline int snapshot_components(const std::string& s)
{
    if (s.size() < 20 || s.compare(0, 4, "WNF1") != 0) throw IoError("not a WNF1 snapshot");
    std::size_t off = 8;
    return int(detail::get<std::uint32_t>(s, off));
}

template <int NC>
void save_snapshot(const std::filesystem::path& p, const SpectralField<NC>& f)
{
    write_atomic(p, encode_snapshot(f));
}

template <int NC>
SpectralField<NC> load_snapshot(const std::filesystem::path& p)
{
    return decode_snapshot<NC>(read_file(p));
}

} // namespace stochci
