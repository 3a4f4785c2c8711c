#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "corast/data/synthetic.hpp"
#include "corast/errors.hpp"
#include "corast/orchestrator/experiment.hpp"
#include "corast/orchestrator/protocol.hpp"
#include "doctest.h"

using namespace corast;
using namespace corast::orchestrator;

namespace {

Message random_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind(1, 3), ext(0, 9);
    std::normal_distribution<double> nd;
    Message m;
    m.kind = static_cast<MessageKind>(kind(rng));
    m.version = rng();
    m.time_begin = static_cast<std::int64_t>(rng() % 100000) - 50000;
    if (m.kind != MessageKind::server_model_updated) {
        m.dim = static_cast<std::uint32_t>(1 + ext(rng));
        m.steps = m.kind == MessageKind::repr_inference_vector ? 1 : static_cast<std::uint32_t>(1 + ext(rng));
        for (std::uint32_t i = 0; i < m.dim * m.steps; ++i) m.payload.push_back(nd(rng) * 1e3);
    }
    return m;
}

// Tiny but complete configuration: every phase runs, in well under a second.
ExperimentConfig tiny(data::Setting setting, FmVariant variant, Task task = Task::h2co_forecast) {
    ExperimentConfig c;
    c.setting = setting;
    c.variant = variant;
    c.task = task;
    c.seeds = {7};
    c.data.synthetic_rows = 3000;
    c.encoder.hidden = 8;
    c.encoder.blocks = 2;
    c.encoder.repr_dim = 12;
    c.encoder.train_window = 32;
    c.encoder.batch_size = 4;
    c.encoder.iterations = 4;
    c.inference_window = 32;
    c.client.seq_len = 32;
    c.client.hidden = 6;
    c.client.depth = 2;
    c.train.max_epochs = 2;
    c.train.batch_size = 64;
    c.window_stride = 4;
    return c;
}

const data::TimeSeriesTable& synthetic_3000() {
    static const auto t = [] {
        data::SyntheticWeatherOptions o;
        o.rows = 3000;
        return data::synthetic_weather(o);
    }();
    return t;
}

// Flattened numeric content of a report (timings excluded).
std::vector<double> numbers(const RunReport& r) {
    std::vector<double> v;
    for (const auto& s : r.seeds) {
        v.insert(v.end(), s.server_losses.begin(), s.server_losses.end());
        v.push_back(static_cast<double>(s.repr_bytes));
        for (const auto& c : s.clients) {
            for (const auto& e : c.curve) v.insert(v.end(), {double(e.epoch), e.train_loss, e.val_loss, e.lr});
            v.push_back(c.test.mean);
            for (const auto& [k, x] : c.test.per_variable) v.push_back(x);
            v.push_back(double(c.best_epoch));
        }
    }
    return v;
}

}  // namespace

TEST_CASE("messages roundtrip bitwise for every kind") {
    std::mt19937_64 rng(11);
    std::set<int> kinds;
    for (int trial = 0; trial < 300; ++trial) {
        const auto m = random_message(rng);
        kinds.insert(static_cast<int>(m.kind));
        const auto bytes = serialize_message(m);
        CHECK(bytes.size() == frame_size(m));
        CHECK(bytes.size() == kFrameHeaderBytes + 8 * m.payload.size());
        const auto back = deserialize_message(bytes);
        CHECK(back == m);
        CHECK(std::memcmp(back.payload.data(), m.payload.data(), 8 * m.payload.size()) == 0);
        CHECK(back.version == m.version);
    }
    CHECK(kinds.size() == 3);
}

TEST_CASE("inference vector of d=256 carries 2048 payload bytes") {
    server::ReprMatrix r{5, 256, 1, 1234, std::vector<double>(256, 0.5)};
    const auto m = make_message(MessageKind::repr_inference_vector, r);
    const auto bytes = serialize_message(m);
    CHECK(bytes.size() - kFrameHeaderBytes == 2048);
    CHECK(kFrameHeaderBytes == 29);
    CHECK(deserialize_message(bytes).version == 5);
    CHECK(to_repr(deserialize_message(bytes)).values == r.values);
}

TEST_CASE("corrupt frames raise decode errors") {
    std::mt19937_64 rng(3);
    Message m;
    m.kind = MessageKind::repr_training_matrix;
    m.dim = 3;
    m.steps = 4;
    m.payload.assign(12, 1.25);
    const auto bytes = serialize_message(m);
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(deserialize_message(part), DecodeError);
    }
    auto bad_kind = bytes;
    bad_kind[4] = 9;
    CHECK_THROWS_AS(deserialize_message(bad_kind), DecodeError);
    auto bad_dim = bytes;
    bad_dim[13] = 4;  // d field, payload no longer matches
    CHECK_THROWS_AS(deserialize_message(bad_dim), DecodeError);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_message(extra), DecodeError);
    Message wrong = m;
    wrong.steps = 5;
    CHECK_THROWS_AS(serialize_message(wrong), UsageError);
}

TEST_CASE("schedule examples") {
    ScheduleConfig s{4, 1, 8};
    std::vector<int> server, broadcast, clients;
    for (int r = 0; r < 8; ++r) {
        const auto a = schedule_rounds(s, r);
        if (a.server_update) server.push_back(r);
        if (a.broadcast) broadcast.push_back(r);
        if (a.clients_update) clients.push_back(r);
    }
    CHECK(server == std::vector<int>{0, 4});
    CHECK(broadcast == std::vector<int>{0, 4});
    CHECK(clients.size() == 8);

    ScheduleConfig co{1, 1, 5};
    for (int r = 0; r < 5; ++r) CHECK(schedule_rounds(co, r).broadcast);

    CHECK_THROWS_AS(schedule_rounds({2, 3, 5}, 0), ConfigError);
    CHECK_THROWS_AS(schedule_rounds({1, 0, 5}, 0), ConfigError);
    CHECK_THROWS_AS(schedule_rounds({1, 1, 5}, -1), UsageError);
}

TEST_CASE("broadcast rounds equal server-update rounds over all small schedules") {
    for (int ts = 1; ts <= 6; ++ts)
        for (int tc = 1; tc <= ts; ++tc) {
            // oracle: countdown timers, no modulo
            int server_timer = 0, client_timer = 0, broadcasts = 0, updates = 0;
            for (int r = 0; r < 30; ++r) {
                const auto a = schedule_rounds({ts, tc, 30}, r);
                CHECK(a.server_update == (server_timer == 0));
                CHECK(a.clients_update == (client_timer == 0));
                CHECK(a.broadcast == a.server_update);
                broadcasts += a.broadcast;
                updates += a.server_update;
                server_timer = server_timer == 0 ? ts - 1 : server_timer - 1;
                client_timer = client_timer == 0 ? tc - 1 : client_timer - 1;
            }
            CHECK(broadcasts == updates);
        }
}

TEST_CASE("alignment picks the column at each window's last input step") {
    data::TimeSeriesTable t;
    t.columns = {"x"};
    for (int r = 0; r < 300; ++r) {
        t.timestamps.push_back(std::to_string(r));
        t.values.push_back(r);
    }
    const auto w = data::make_windows(t, {"x"}, {"x"}, {0, 300}, 131, 1, 7);
    REQUIRE(w.end_index(0) == 130);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    server::ReprMatrix m{1, 4, 300, 0, {}};
    for (int i = 0; i < 4 * 300; ++i) m.values.push_back(nd(rng));
    const auto a = align_representations(m, w);
    REQUIRE(a.dim(0) == w.count());
    for (int j = 0; j < 4; ++j) CHECK(a.at(0, j) == m.values[static_cast<std::size_t>(j * 300 + 130)]);
    for (std::int64_t i = 0; i < w.count(); ++i)
        for (int j = 0; j < 4; ++j) CHECK(a.at(i, j) == m.column_at(w.end_index(i))[static_cast<std::size_t>(j)]);

    const auto msg = make_message(MessageKind::repr_training_matrix, m);
    CHECK(align_representations(msg, w).to_vector() == a.to_vector());

    server::ReprMatrix short_m{1, 4, 100, 0, std::vector<double>(400, 0.0)};
    try {
        align_representations(short_m, w);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("window 0") != std::string::npos);
    }
    // offset matrix missing the middle: a later window is named
    server::ReprMatrix tail{1, 4, 100, 100, std::vector<double>(400, 0.0)};
    try {
        align_representations(tail, w);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("window 10") != std::string::npos);  // ends at 130 + 70 = 200
    }
}

TEST_CASE("derived seeds are stable and distinct per label") {
    CHECK(derive_seed(1, "server") == derive_seed(1, "server"));
    CHECK(derive_seed(1, "server") != derive_seed(2, "server"));
    CHECK(derive_seed(1, "client:Tdew") != derive_seed(1, "client:rh"));
    CHECK(derive_seed(1, "client:Tdew") != derive_seed(1, "server"));
}

TEST_CASE("config resolution") {
    auto c = tiny(data::Setting::distributed1, FmVariant::corast_rho);
    CHECK(c.resolved_server_columns() == std::vector<std::string>{"rho"});
    c.server_columns = {"Tdew"};
    CHECK_THROWS_AS(c.validate(), ConfigError);

    auto n = tiny(data::Setting::distributed1, FmVariant::no_fm);
    CHECK(n.resolved_server_columns().empty());
    const auto cl = n.resolved_clients();
    REQUIRE(cl.size() == 3);
    CHECK(cl[0].inputs == std::vector<std::string>{"Tdew"});
    CHECK(cl[1].inputs == std::vector<std::string>{"rh"});
    CHECK(cl[2].inputs == std::vector<std::string>{"sh"});
    for (const auto& x : cl) {
        CHECK(x.targets == std::vector<std::string>{"H2OC"});
        CHECK(x.variant == client::Variant::no_fm);
    }
    auto local = tiny(data::Setting::distributed2, FmVariant::corast, Task::local_forecast);
    std::vector<std::size_t> outs;
    for (const auto& x : local.resolved_clients()) {
        CHECK(x.targets == x.inputs);
        outs.push_back(x.targets.size());
    }
    CHECK(outs == std::vector<std::size_t>{2, 2, 1});
    CHECK(local.resolved_server_columns().size() == 5);

    auto bad = tiny(data::Setting::distributed1, FmVariant::corast);
    bad.clients = {3};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.clients = {0, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.clients = {};
    bad.schedule = {1, 2, 4};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(parse_variant("fm"), ConfigError);
    CHECK_THROWS_AS(parse_task("global"), ConfigError);
}

TEST_CASE("no-fm runs exchange nothing") {
    const auto r = run_experiment(tiny(data::Setting::distributed1, FmVariant::no_fm), synthetic_3000());
    REQUIRE(r.seeds.size() == 1);
    const auto& s = r.seeds[0];
    CHECK(s.trace.empty());
    CHECK(s.repr_bytes == 0);
    CHECK(s.server_parameter_count == 0);
    REQUIRE(s.clients.size() == 3);
    for (const auto& c : s.clients) {
        CHECK(c.repr_bytes == 0);
        CHECK(c.messages_received == 0);
        CHECK(c.test.per_variable.count("H2OC") == 1);
        CHECK(std::isfinite(c.test.mean));
        CHECK(!c.curve.empty());
    }
}

TEST_CASE("corast run: byte accounting, one-directional trace, broadcast on update") {
    const auto cfg = tiny(data::Setting::distributed1, FmVariant::corast);
    const auto r = run_experiment(cfg, synthetic_3000());
    const auto& s = r.seeds.at(0);
    const std::int64_t span = r.splits.validation.end;  // training matrix covers [0, val_end)
    const std::int64_t d = cfg.encoder.repr_dim;
    const auto test_windows = data::windows_for_split(synthetic_3000().select({"Tdew", "H2OC"}), {"Tdew"}, {"H2OC"},
                                                      r.splits.test, cfg.client.seq_len, 1, 1)
                                  .count();

    std::size_t matrices = 0, vectors = 0, notices = 0;
    for (const auto& e : s.trace) {
        CHECK(e.from == kServerEndpoint);
        CHECK(e.to >= 0);
        if (e.kind == MessageKind::repr_training_matrix) {
            ++matrices;
            CHECK(e.bytes - kFrameHeaderBytes == static_cast<std::size_t>(8 * d * span));
        } else if (e.kind == MessageKind::repr_inference_vector) {
            ++vectors;
            CHECK(e.bytes - kFrameHeaderBytes == static_cast<std::size_t>(8 * d));
        } else {
            ++notices;
            CHECK(e.bytes == kFrameHeaderBytes);
        }
    }
    CHECK(matrices == 3);
    CHECK(notices == 3);
    CHECK(vectors == static_cast<std::size_t>(3 * test_windows));
    CHECK(s.message_counts.at("ReprTrainingMatrix") == 3);
    CHECK(s.server_update_rounds == s.broadcast_rounds);
    CHECK(s.server_update_rounds == std::vector<int>{0});
    CHECK(s.server_losses.size() == static_cast<std::size_t>(cfg.encoder.iterations));
    std::uint64_t sum = 0;
    for (const auto& c : s.clients) {
        const std::uint64_t expect =
            (kFrameHeaderBytes + 8 * d * span) + static_cast<std::uint64_t>(test_windows) * (kFrameHeaderBytes + 8 * d);
        CHECK(c.repr_bytes == expect);
        sum += c.repr_bytes;
    }
    CHECK(s.repr_bytes == sum);
    CHECK(!r.notes.empty());
}

TEST_CASE("identical configs give identical numbers; threads do not change them") {
    auto cfg = tiny(data::Setting::distributed1, FmVariant::corast);
    const auto a = run_experiment(cfg, synthetic_3000());
    const auto b = run_experiment(cfg, synthetic_3000());
    CHECK(numbers(a) == numbers(b));
    cfg.threads = 3;
    const auto c = run_experiment(cfg, synthetic_3000());
    CHECK(numbers(a) == numbers(c));
}

TEST_CASE("removing a client leaves the others' parameters unchanged") {
    auto capture = [](const ExperimentConfig& cfg) {
        std::map<int, std::vector<double>> params;
        RunHooks hooks;
        hooks.on_client_trained = [&](std::uint64_t, int id, const client::ClientModel& m) {
            for (const auto& p : m.parameters().items())
                for (double x : p.value.to_vector()) params[id].push_back(x);
        };
        run_experiment(cfg, synthetic_3000(), hooks);
        return params;
    };
    for (auto variant : {FmVariant::no_fm, FmVariant::corast}) {
        auto all = tiny(data::Setting::distributed1, variant);
        auto some = all;
        some.clients = {0, 2};
        const auto pa = capture(all), ps = capture(some);
        REQUIRE(pa.size() == 3);
        REQUIRE(ps.size() == 2);
        CHECK(ps.at(0) == pa.at(0));
        CHECK(ps.at(2) == pa.at(2));
    }
}

TEST_CASE("continual schedule: broadcasts only when the server updates") {
    auto cfg = tiny(data::Setting::distributed1, FmVariant::corast);
    cfg.schedule = {3, 1, 6};
    cfg.server_update_iterations = 2;
    const auto r = run_experiment(cfg, synthetic_3000());
    const auto& s = r.seeds.at(0);
    CHECK(s.server_update_rounds == std::vector<int>{0, 3});
    CHECK(s.broadcast_rounds == s.server_update_rounds);
    CHECK(s.server_losses.size() == static_cast<std::size_t>(cfg.encoder.iterations + 2));
    CHECK(s.message_counts.at("ReprTrainingMatrix") == 6);
    std::set<int> matrix_rounds;
    for (const auto& e : s.trace)
        if (e.kind == MessageKind::repr_training_matrix) matrix_rounds.insert(e.round);
    CHECK(matrix_rounds == std::set<int>{0, 3});
    for (const auto& c : s.clients) {
        REQUIRE(c.curve.size() == 6);
        for (std::size_t i = 0; i < c.curve.size(); ++i) CHECK(c.curve[i].epoch == static_cast<int>(i) + 1);
    }
}

TEST_CASE("local task reports every variable of its client") {
    const auto r = run_experiment(tiny(data::Setting::distributed2, FmVariant::corast, Task::local_forecast),
                                  synthetic_3000());
    std::set<std::string> vars;
    for (const auto& c : r.seeds.at(0).clients)
        for (const auto& [k, v] : c.test.per_variable) {
            CHECK(vars.insert(k).second);
            CHECK(std::isfinite(v));
        }
    CHECK(vars == std::set<std::string>{"Tdew", "Tpot", "rh", "p", "sh"});
}

TEST_CASE("server cache reuses the pretrained encoder") {
    ServerCache cache;
    RunHooks hooks;
    hooks.cache = &cache;
    auto h2co = tiny(data::Setting::distributed1, FmVariant::corast);
    const auto a = run_experiment(h2co, synthetic_3000(), hooks);
    const auto b = run_experiment(h2co, synthetic_3000(), hooks);
    const auto plain = run_experiment(h2co, synthetic_3000());
    CHECK(numbers(a) == numbers(plain));
    CHECK(numbers(b) == numbers(plain));
}

TEST_CASE("errors carry seed, client and phase") {
    auto cfg = tiny(data::Setting::distributed1, FmVariant::no_fm);
    cfg.data.synthetic_rows = 100;
    cfg.client.seq_len = 100;
    try {
        run_experiment(cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("(seed 7, client 0, phase setup)") != std::string::npos);
    }
}
