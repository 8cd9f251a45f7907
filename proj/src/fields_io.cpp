#include "oswitch/fields_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "oswitch/error.hpp"

namespace oswitch {

static_assert(std::endian::native == std::endian::little, "binary layout assumes a little-endian host");

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_fields_csv(std::ostream& out, const ValueFields& f, const FieldsHeader& header) {
    const Lattice lat(f.grid);
    out << "# tool: " << header.tool_version << "\n";
    out << "# config_hash: " << hash_hex(header.config_hash) << "\n";
    out << "# k: " << lat.k() << ", m: " << f.m << ", slices: " << f.slices() << "\n";
    out << "t";
    for (int q = 0; q < lat.k(); ++q) out << ",x" << q + 1;
    for (int i = 0; i < f.m; ++i) out << ",v" << i + 1;
    out << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t s = 0; s < f.slices(); ++s) {
        for (std::size_t node = 0; node < lat.size(); ++node) {
            put(f.times[s]);
            for (int q = 0; q < lat.k(); ++q) {
                out << ',';
                put(lat.coord(node, q));
            }
            for (int i = 0; i < f.m; ++i) {
                out << ',';
                put(f.value(s, i, node));
            }
            out << '\n';
        }
    }
}

namespace {

class Writer {
public:
    template <class T>
    void put(T v) {
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.append(raw, sizeof(T));
    }
    void bytes(std::string_view s) { buf_.append(s); }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view s) : s_(s) {}
    template <class T>
    T get() {
        if (pos_ + sizeof(T) > s_.size()) throw FormatError("fields file truncated");
        T v;
        std::memcpy(&v, s_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        if (pos_ + n > s_.size()) throw FormatError("fields file truncated");
        std::string out(s_.substr(pos_, n));
        pos_ += n;
        return out;
    }
    std::size_t pos() const { return pos_; }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_fields_binary(std::ostream& out, const ValueFields& f, const FieldsHeader& header) {
    Writer w;
    w.bytes("OSWF");
    w.put<std::uint32_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(header.tool_version.size()));
    w.bytes(header.tool_version);
    w.put<std::uint64_t>(header.config_hash);
    const int k = f.grid.k();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.m));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.slices()));
    for (int n : f.grid.nodes) w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
    for (const auto& [lo, hi] : f.grid.box) {
        w.put<double>(lo);
        w.put<double>(hi);
    }
    w.put<double>(f.horizon);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.grid.n_time));
    w.put<std::uint32_t>(f.grid.boundary == BoundaryPolicy::LinearExtrapolation ? 0u : 1u);
    w.put<double>(f.grid.theta);
    for (double t : f.times) w.put<double>(t);
    for (const auto& slice : f.data)
        for (double v : slice) w.put<double>(v);
    const std::uint64_t sum = fnv1a64(w.str());
    w.put<std::uint64_t>(sum);
    out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    if (!out) throw Error("failed to write fields file");
}

ValueFields read_fields_binary(std::istream& in, FieldsHeader* header) {
    const std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (all.size() < 12 || all.compare(0, 4, "OSWF") != 0) throw FormatError("not a fields file (bad magic)");
    const std::string_view body(all.data(), all.size() - 8);
    std::uint64_t stored;
    std::memcpy(&stored, all.data() + all.size() - 8, 8);
    if (fnv1a64(body) != stored) throw FormatError("fields file checksum mismatch");

    Reader r(body);
    (void)r.bytes(4);
    if (r.get<std::uint32_t>() != 1u) throw FormatError("unsupported fields format version");
    FieldsHeader h;
    h.tool_version = r.bytes(r.get<std::uint32_t>());
    h.config_hash = r.get<std::uint64_t>();
    const auto k = r.get<std::uint32_t>();
    const auto m = r.get<std::uint32_t>();
    const auto n_slices = r.get<std::uint32_t>();
    if (k < 1 || k > static_cast<std::uint32_t>(kMaxStateDim) || m < 1 || n_slices < 1)
        throw FormatError("fields file has invalid dimensions");
    ValueFields f;
    f.m = static_cast<int>(m);
    for (std::uint32_t q = 0; q < k; ++q) f.grid.nodes.push_back(static_cast<int>(r.get<std::uint32_t>()));
    for (std::uint32_t q = 0; q < k; ++q) {
        const double lo = r.get<double>();
        const double hi = r.get<double>();
        f.grid.box.emplace_back(lo, hi);
    }
    f.horizon = r.get<double>();
    f.grid.n_time = static_cast<int>(r.get<std::uint32_t>());
    f.grid.boundary = r.get<std::uint32_t>() == 0 ? BoundaryPolicy::LinearExtrapolation
                                                   : BoundaryPolicy::ZeroSecondDerivative;
    f.grid.theta = r.get<double>();
    try {
        f.grid.validate(static_cast<int>(k));
    } catch (const Error& e) {
        throw FormatError(std::string("fields file grid invalid: ") + e.what());
    }
    for (std::uint32_t s = 0; s < n_slices; ++s) f.times.push_back(r.get<double>());
    const std::size_t per = f.grid.node_count() * m;
    if (body.size() - r.pos() != static_cast<std::size_t>(n_slices) * per * 8)
        throw FormatError("fields file payload size mismatch");
    f.data.assign(n_slices, std::vector<double>(per));
    for (auto& slice : f.data)
        for (double& v : slice) v = r.get<double>();
    if (header) *header = std::move(h);
    return f;
}

}  // namespace oswitch
