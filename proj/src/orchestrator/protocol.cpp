#include "corast/orchestrator/protocol.hpp"

#include <bit>
#include <cstring>
#include <unordered_map>

#include "corast/errors.hpp"

namespace corast::orchestrator {

static_assert(std::endian::native == std::endian::little, "wire formats assume a little-endian host");

std::string to_string(MessageKind k) {
    switch (k) {
        case MessageKind::repr_training_matrix: return "ReprTrainingMatrix";
        case MessageKind::repr_inference_vector: return "ReprInferenceVector";
        case MessageKind::server_model_updated: return "ServerModelUpdated";
    }
    return "?";
}

std::size_t frame_size(const Message& m) { return kFrameHeaderBytes + 8 * m.payload.size(); }

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto at = out.size();
    out.resize(at + sizeof(T));
    std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw DecodeError("message frame truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_message(const Message& m) {
    if (m.payload.size() != static_cast<std::size_t>(m.dim) * m.steps)
        throw UsageError("message payload holds " + std::to_string(m.payload.size()) + " values, header says " +
                         std::to_string(m.dim) + " x " + std::to_string(m.steps));
    std::vector<std::uint8_t> out;
    out.reserve(frame_size(m));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(frame_size(m) - 4));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(m.kind));
    put<std::uint64_t>(out, m.version);
    put<std::uint32_t>(out, m.dim);
    put<std::uint32_t>(out, m.steps);
    put<std::int64_t>(out, m.time_begin);
    const auto at = out.size();
    out.resize(at + 8 * m.payload.size());
    if (!m.payload.empty()) std::memcpy(out.data() + at, m.payload.data(), 8 * m.payload.size());
    return out;
}

Message deserialize_message(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    const auto length = take<std::uint32_t>(bytes, pos);
    if (static_cast<std::size_t>(length) + 4 != bytes.size())
        throw DecodeError("frame length field says " + std::to_string(length) + " bytes, got " +
                          std::to_string(bytes.size() < 4 ? 0 : bytes.size() - 4));
    Message m;
    const auto kind = take<std::uint8_t>(bytes, pos);
    if (kind < 1 || kind > 3) throw DecodeError("unknown message kind " + std::to_string(kind));
    m.kind = static_cast<MessageKind>(kind);
    m.version = take<std::uint64_t>(bytes, pos);
    m.dim = take<std::uint32_t>(bytes, pos);
    m.steps = take<std::uint32_t>(bytes, pos);
    m.time_begin = take<std::int64_t>(bytes, pos);
    const std::size_t n = static_cast<std::size_t>(m.dim) * m.steps;
    if (bytes.size() - pos != 8 * n)
        throw DecodeError("payload has " + std::to_string(bytes.size() - pos) + " bytes, header implies " +
                          std::to_string(8 * n));
    if (m.kind == MessageKind::server_model_updated && n != 0)
        throw DecodeError("ServerModelUpdated frame carries a payload");
    m.payload.resize(n);
    if (n != 0) std::memcpy(m.payload.data(), bytes.data() + pos, 8 * n);
    return m;
}

Message make_message(MessageKind kind, server::ReprMatrix r) {
    if (kind == MessageKind::server_model_updated) throw UsageError("ServerModelUpdated carries no representation");
    Message m;
    m.kind = kind;
    m.version = r.version;
    m.dim = static_cast<std::uint32_t>(r.dim);
    m.steps = static_cast<std::uint32_t>(r.steps);
    m.time_begin = r.time_begin;
    m.payload = std::move(r.values);
    return m;
}

Message make_update_notice(std::uint64_t version) {
    Message m;
    m.kind = MessageKind::server_model_updated;
    m.version = version;
    return m;
}

server::ReprMatrix to_repr(const Message& m) {
    if (m.kind == MessageKind::server_model_updated) throw UsageError("ServerModelUpdated carries no representation");
    return {m.version, m.dim, m.steps, m.time_begin, m.payload};
}

void ScheduleConfig::validate() const {
    if (client_interval < 1) throw ConfigError("client update interval T_c must be >= 1");
    if (server_interval < client_interval)
        throw ConfigError("server update interval T_s (" + std::to_string(server_interval) +
                          ") must be >= client interval T_c (" + std::to_string(client_interval) + ")");
    if (rounds < 1) throw ConfigError("schedule needs at least one round");
}

RoundActions schedule_rounds(const ScheduleConfig& schedule, int round) {
    schedule.validate();
    if (round < 0) throw UsageError("round index must be >= 0");
    RoundActions a;
    a.server_update = round % schedule.server_interval == 0;
    a.clients_update = round % schedule.client_interval == 0;
    a.broadcast = a.server_update;
    return a;
}

std::shared_ptr<const Message> MessageBus::send_from_server(int round, int client, std::shared_ptr<const Message> msg) {
    const std::size_t bytes = frame_size(*msg);
    trace_.push_back({round, kServerEndpoint, client, msg->kind, msg->version, bytes});
    total_bytes_ += bytes;
    return msg;
}

std::size_t MessageBus::count(MessageKind kind) const {
    std::size_t n = 0;
    for (const auto& e : trace_) n += e.kind == kind ? 1 : 0;
    return n;
}

namespace {

// values: dim x steps row-major covering rows [begin, begin + steps)
nn::Tensor align_matrix(std::int64_t dim, std::int64_t steps, std::int64_t begin, const double* values,
                        const data::WindowBatch& windows) {
    nn::Tensor out({windows.count(), dim});
    for (std::int64_t i = 0; i < windows.count(); ++i) {
        const std::int64_t t = windows.end_index(i);
        if (t < begin || t >= begin + steps)
            throw RangeError("cannot align window " + std::to_string(i) + ": it ends at row " + std::to_string(t) +
                             ", representations cover rows [" + std::to_string(begin) + ", " +
                             std::to_string(begin + steps) + ")");
        double* row = out.data() + i * dim;
        for (std::int64_t j = 0; j < dim; ++j) row[j] = values[j * steps + (t - begin)];
    }
    return out;
}

}  // namespace

nn::Tensor align_representations(const server::ReprMatrix& m, const data::WindowBatch& windows) {
    return align_matrix(m.dim, m.steps, m.time_begin, m.values.data(), windows);
}

nn::Tensor align_representations(const Message& m, const data::WindowBatch& windows) {
    if (m.kind != MessageKind::repr_training_matrix)
        throw UsageError("alignment needs a ReprTrainingMatrix, got " + to_string(m.kind));
    return align_matrix(m.dim, m.steps, m.time_begin, m.payload.data(), windows);
}

nn::Tensor align_representations(const std::vector<server::ReprMatrix>& points, const data::WindowBatch& windows) {
    std::unordered_map<std::int64_t, const server::ReprMatrix*> by_time;
    std::int64_t dim = 0;
    for (const auto& p : points) {
        by_time[p.time_begin] = &p;
        dim = p.dim;
    }
    nn::Tensor out({windows.count(), dim});
    for (std::int64_t i = 0; i < windows.count(); ++i) {
        const std::int64_t t = windows.end_index(i);
        auto it = by_time.find(t);
        if (it == by_time.end())
            throw RangeError("cannot align window " + std::to_string(i) + ": no inference-point representation for row " +
                             std::to_string(t));
        std::copy(it->second->values.begin(), it->second->values.end(), out.data() + i * dim);
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    // FNV-1a over the label, mixed with the seed through splitmix64
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace corast::orchestrator
