#include "adaseg/raster.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace adaseg::raster {
namespace {

std::uint32_t to_little(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

void check_size(const std::filesystem::path& path, std::uintmax_t expected)
{
    std::error_code ec;
    const auto actual = std::filesystem::file_size(path, ec);
    if (ec) throw std::runtime_error("cannot stat raster " + path.string() + ": " + ec.message());
    if (actual != expected) {
        throw std::runtime_error("raster " + path.string() + " has " + std::to_string(actual) +
                                 " bytes, expected " + std::to_string(expected) +
                                 " (dimension mismatch)");
    }
}

}  // namespace

void write_f32(const std::filesystem::path& path, std::span<const float> values)
{
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        words[i] = to_little(std::bit_cast<std::uint32_t>(values[i]));
    }
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_u8(const std::filesystem::path& path, std::span<const std::uint8_t> values)
{
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count)
{
    check_size(path, count * sizeof(float));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open raster: " + path.string());
    std::vector<std::uint32_t> words(count);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("short read: " + path.string());
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(to_little(words[i]));
    return values;
}

std::vector<std::uint8_t> read_u8(const std::filesystem::path& path, std::size_t count)
{
    check_size(path, count);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open raster: " + path.string());
    std::vector<std::uint8_t> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count));
    if (!in) throw std::runtime_error("short read: " + path.string());
    return values;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace adaseg::raster
