#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "pakan/data.hpp"
#include "pakan/error.hpp"

namespace pakan {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw ParseError(std::string("truncated ") + what, pos_);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> pktn_encode(const NamedTensors& entries) {
    std::vector<std::uint8_t> out{'P', 'K', 'T', 'N', kPktnVersion};
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    std::set<std::string> names;
    for (const auto& [name, t] : entries) {
        if (!names.insert(name).second) throw ValidationError("duplicate PKTN entry name '" + name + "'");
        if (name.size() > 0xFFFF) throw ValidationError("PKTN entry name longer than 65535 bytes");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

NamedTensors pktn_decode(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (bytes.size() < 4 || bytes[0] != 'P' || bytes[1] != 'K' || bytes[2] != 'T' || bytes[3] != 'N') {
        throw ParseError("bad PKTN magic", 0);
    }
    r.str(4, "magic");
    const std::size_t version_at = r.offset();
    if (const auto v = r.u8("version"); v != kPktnVersion) {
        throw ParseError("unsupported PKTN version " + std::to_string(v), version_at);
    }
    const std::uint32_t count = r.u32("entry count");
    NamedTensors out;
    std::set<std::string> names;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::size_t entry_at = r.offset();
        const std::uint16_t len = r.u16("name length");
        std::string name = r.str(len, "entry name");
        if (!names.insert(name).second) throw ParseError("duplicate entry name '" + name + "'", entry_at);
        const std::size_t rank_at = r.offset();
        const std::uint8_t rank = r.u8("rank");
        if (rank > 4) throw ParseError("entry rank " + std::to_string(rank) + " exceeds 4", rank_at);
        Shape dims;
        for (std::uint8_t i = 0; i < rank; ++i) dims.push_back(r.u32("dims"));
        const std::size_t n = shape_numel(dims);
        r.need(4 * n, "payload");
        Tensor t(dims);
        for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(std::bit_cast<float>(r.u32("payload")));
        out.emplace_back(std::move(name), std::move(t));
    }
    if (r.offset() != bytes.size()) throw ParseError("trailing bytes after last entry", r.offset());
    return out;
}

void pktn_write(const std::filesystem::path& path, const NamedTensors& entries) {
    const auto bytes = pktn_encode(entries);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("failed writing '" + path.string() + "'");
}

NamedTensors pktn_read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return pktn_decode(bytes);
}

const Tensor& find_entry(const NamedTensors& entries, const std::string& name) {
    for (const auto& [n, t] : entries) {
        if (n == name) return t;
    }
    throw ValidationError("missing entry '" + name + "'");
}

Tensor round_to_f32(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.data()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

}  // namespace pakan
