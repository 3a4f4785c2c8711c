#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "corast/data/pipeline.hpp"
#include "corast/nn/tensor.hpp"
#include "corast/server/fm_server.hpp"

namespace corast::orchestrator {

enum class MessageKind : std::uint8_t {
    repr_training_matrix = 1,
    repr_inference_vector = 2,
    server_model_updated = 3,
};

std::string to_string(MessageKind k);

/// One server -> client transmission. Every kind originates at the server;
/// there is no message type for client observations.
struct Message {
    MessageKind kind = MessageKind::server_model_updated;
    std::uint64_t version = 0;
    std::uint32_t dim = 0;
    std::uint32_t steps = 0;
    std::int64_t time_begin = 0;
    std::vector<double> payload;  ///< dim x steps, row-major; empty for server_model_updated

    friend bool operator==(const Message&, const Message&) = default;
};

// Frame (little-endian):
//   u32 frame length (bytes after this field)
//   u8 kind | u64 version | u32 d | u32 T | i64 time_begin | d*T float64
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 8 + 4 + 4 + 8;

/// Wire size of a message: header + 8 * d * T.
std::size_t frame_size(const Message& m);
std::vector<std::uint8_t> serialize_message(const Message& m);
/// Throws DecodeError on truncated, oversized or inconsistent frames.
Message deserialize_message(const std::vector<std::uint8_t>& bytes);

Message make_message(MessageKind kind, server::ReprMatrix m);
/// Payload-free version tag.
Message make_update_notice(std::uint64_t version);
server::ReprMatrix to_repr(const Message& m);

struct ScheduleConfig {
    int server_interval = 1;  ///< T_s
    int client_interval = 1;  ///< T_c
    int rounds = 1;

    /// Requires T_s >= T_c >= 1 and rounds >= 1.
    void validate() const;
};

struct RoundActions {
    bool server_update = false;
    bool clients_update = false;
    bool broadcast = false;
};

/// Server updates iff r % T_s == 0, clients iff r % T_c == 0, and a new
/// representation goes out exactly when the server updated.
RoundActions schedule_rounds(const ScheduleConfig& schedule, int round);

inline constexpr int kServerEndpoint = -1;

struct TraceEntry {
    int round = 0;
    int from = kServerEndpoint;
    int to = 0;
    MessageKind kind = MessageKind::server_model_updated;
    std::uint64_t version = 0;
    std::size_t bytes = 0;
};

/// In-process transport. Only the server can send; each delivery is recorded
/// with its analytic wire size.
class MessageBus {
public:
    std::shared_ptr<const Message> send_from_server(int round, int client, std::shared_ptr<const Message> msg);

    const std::vector<TraceEntry>& trace() const { return trace_; }
    std::uint64_t total_bytes() const { return total_bytes_; }
    std::size_t count(MessageKind kind) const;

private:
    std::vector<TraceEntry> trace_;
    std::uint64_t total_bytes_ = 0;
};

/// Row i is the representation at window i's last input step.
/// Throws RangeError naming the first window the matrix does not cover.
nn::Tensor align_representations(const server::ReprMatrix& m, const data::WindowBatch& windows);
/// Same, reading a received ReprTrainingMatrix in place.
nn::Tensor align_representations(const Message& m, const data::WindowBatch& windows);

/// Same, from per-time inference-point vectors (each d x 1).
nn::Tensor align_representations(const std::vector<server::ReprMatrix>& points, const data::WindowBatch& windows);

/// Independent RNG stream for a named participant of one seed's run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace corast::orchestrator
