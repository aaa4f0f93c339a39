#include "doctest.h"
#include "fixtures.hpp"
#include "toy_plant.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/harness/experiment.hpp"
#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/harness/packets.hpp"
#include "hydronmpc/harness/udp.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

using namespace hnmpc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Scenario scenario(const std::string& name) {
  return load_scenario(std::filesystem::path(HYDRONMPC_SCENARIO_DIR) / (name + ".kv"));
}

Scenario still_scenario() {
  return parse_scenario(KeyValueFile::parse(
      "name = still\nduration = 4\nref.swing = const 0.0\nref.boom = const 0.2\nref.arm = const -1.5\n"
      "controller = pid\n",
      "still"));
}

const SsmpModel& toy_model() {
  static const SsmpModel m = fixture::small_model(toy::linear_store(41, 2, 120), 5, 4, 2);
  return m;
}

NmpcConfig light_config() {
  NmpcConfig c;
  c.k1 = 3;
  c.k2 = 1;
  c.residual.loops = 1;
  c.residual.batch_size = 4;
  c.residual.capacity = 8;
  return c;
}

}  // namespace

TEST_CASE("rmse examples") {
  CHECK(rmse(vec({0.3, -1.0}), vec({0.3, -1.0})) == 0.0);
  CHECK(rmse(vec({0.0, 0.0}), vec({1.0, 1.0})) == 1.0);
  CHECK(rmse(vec({0.0, 0.0, 0.0}), vec({3.0, 4.0, 0.0})) == doctest::Approx(std::sqrt(25.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(rmse(vec({0.0}), vec({1.0, 2.0})), ContractError);
  CHECK_THROWS_AS(rmse(Vector(), Vector()), ContractError);
}

TEST_CASE("armse streaming equals recomputed prefix means") {
  Armse a;
  a.add(2.5);
  CHECK(a.value() == 2.5);
  Armse b;
  b.add(1.0);
  b.add(3.0);
  CHECK(b.value() == 2.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  Armse s;
  std::vector<double> seen;
  for (int k = 0; k < 2000; ++k) {
    seen.push_back(d(rng));
    s.add(seen.back());
    double sum = 0.0;
    for (double v : seen) sum += v;
    CHECK(std::abs(s.value() - sum / static_cast<double>(seen.size())) <= 1e-12);
  }
}

TEST_CASE("energy_efficiency examples") {
  std::vector<EnergySample> none(50, EnergySample{2e-3, 0.0});
  const EnergySeries e1 = energy_efficiency(none, 0.02);
  CHECK(e1.final_value() == 1.0);
  CHECK_FALSE(e1.undefined);

  std::vector<EnergySample> all(50, EnergySample{2e-3, 2e-3});
  CHECK(energy_efficiency(all, 0.02).final_value() == doctest::Approx(0.0).epsilon(1e-14));

  std::vector<EnergySample> half(50, EnergySample{2e-3, 1e-3});
  const EnergySeries e3 = energy_efficiency(half, 0.02);
  for (std::size_t k = 1; k < e3.efficiency.size(); ++k) CHECK(e3.efficiency[k] == doctest::Approx(0.5).epsilon(1e-14));

  std::vector<EnergySample> off(10, EnergySample{0.0, 0.0});
  const EnergySeries e4 = energy_efficiency(off, 0.02);
  CHECK(e4.undefined);
  CHECK(e4.final_value() == 1.0);

  // Trapezoid against a hand sum on a ramp.
  std::vector<EnergySample> ramp;
  for (int k = 0; k < 5; ++k) ramp.push_back({1.0 + k, 0.5 * k});
  const double sup = 0.5 * (1 + 5) + 2 + 3 + 4;
  const double ovf = 0.5 * (0 + 2) + 0.5 + 1.0 + 1.5;
  CHECK(energy_efficiency(ramp, 1.0).final_value() == doctest::Approx(1.0 - ovf / sup).epsilon(1e-14));
}

TEST_CASE("flops_estimate examples") {
  CHECK(flops_estimate(1, 1, 1, 1, 1) == 34);
  CHECK(flops_estimate(20, 9, 4, 128, 10) ==
        4ull * 128 * 20 * (9 + 128 + 3) + (20ull * 9 + 2 * 4 + 3 * 128 + 2 * 10 + 6) * 128);
  for (std::uint64_t j : {8u, 32u, 64u, 128u}) CHECK(flops_estimate(10, 13, 4, 2 * j, 5) > 2 * flops_estimate(10, 13, 4, j, 5));
  CHECK_THROWS_AS(flops_estimate(0, 1, 1, 1, 1), ConfigError);
}

TEST_CASE("packets: sizes, bit-exact round trips, malformed input") {
  PacketState s{0xFFFFFFFFu, 1234.5, {}};
  s.state = {0.0, -0.0, 1e308, -1e-308, std::numeric_limits<double>::denorm_min(),
             std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::quiet_NaN(), 3.25};
  const auto sb = encode_state(s);
  CHECK(sb.size() == 86);
  CHECK(sb[0] == 'S');
  CHECK(sb[1] == 'T');
  CHECK(sb[2] == 0xFF);
  const auto sd = decode_state(sb);
  REQUIRE(sd);
  CHECK(sd->sequence == s.sequence);
  CHECK(std::memcmp(&sd->timestamp, &s.timestamp, 8) == 0);
  CHECK(std::memcmp(sd->state.data(), s.state.data(), 72) == 0);
  CHECK(encode_state(*sd) == sb);

  PacketCommand c{7, {-1.0, 0.5, std::numeric_limits<double>::max()}, 2, 0xBEEF};
  const auto cb = encode_command(c);
  CHECK(cb.size() == 33);
  CHECK(cb[2] == 7);
  CHECK(cb[30] == 2);
  CHECK(cb[31] == 0xEF);
  CHECK(cb[32] == 0xBE);
  const auto cd = decode_command(cb);
  REQUIRE(cd);
  CHECK(encode_command(*cd) == cb);

  auto bad = sb;
  bad[0] = 'X';
  CHECK_FALSE(decode_state(bad));
  CHECK_FALSE(decode_state(std::span<const std::uint8_t>(sb.data(), 85)));
  CHECK_FALSE(decode_command(sb));
  CHECK_FALSE(decode_state(cb));
}

TEST_CASE("PID experiment: holding still gives near-zero error; summaries are byte-stable") {
  const Scenario still = still_scenario();
  const RunSummary s = summarize(run_experiment(still, PlantParams{}, nullptr), 0.0);
  for (double r : s.rmse) CHECK(r < 1e-3);
  CHECK(s.gear_switches == 0);

  const Scenario loaded = scenario("loaded");
  auto render = [&] {
    std::ostringstream sum, trace;
    const RunTrace t = run_pid_experiment(loaded, PlantParams{}, PidGains{}, 2);
    write_summary_csv(sum, {summarize(t, loaded.score_from)});
    write_trace_csv(trace, t);
    return sum.str() + trace.str();
  };
  CHECK(render() == render());
}

TEST_CASE("NMPC experiment: deterministic, bounded inputs, cooldown respected") {
  const Scenario sc = scenario("noload");
  Scenario shortened = sc;
  shortened.duration = 3.0;
  auto run = [&] {
    NmpcController ctl(toy_model(), light_config(), 3);
    return run_experiment(shortened, PlantParams{}, &ctl);
  };
  const RunTrace a = run();
  const RunTrace b = run();
  std::ostringstream sa, sb;
  write_trace_csv(sa, a);
  write_trace_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.time.size() == 150);
  for (const InputVector& u : a.inputs) CHECK(u.head<3>().cwiseAbs().maxCoeff() <= 1.0);
  const RunSummary s = summarize(a, 0.0);
  CHECK(s.warmup_cycles == toy_model().history());
  CHECK(s.min_switch_interval >= 1.0 - 1e-9);
  for (double e : a.efficiency.efficiency) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
  // cycle_ms only with the wall-clock flag.
  CHECK(sa.str().find("cycle_ms") == std::string::npos);
  std::ostringstream sw;
  write_trace_csv(sw, a, true);
  CHECK(sw.str().find("cycle_ms") != std::string::npos);
}

TEST_CASE("drop_schedule is seeded and near its rate") {
  const auto a = drop_schedule(5000, 0.1, 3);
  CHECK(a == drop_schedule(5000, 0.1, 3));
  const auto n = static_cast<double>(std::count(a.begin(), a.end(), true));
  CHECK(n > 400);
  CHECK(n < 600);
  const auto none = drop_schedule(100, 0.0, 3);
  CHECK(std::count(none.begin(), none.end(), true) == 0);
}

namespace {

struct LoopResult {
  ServeStats serve;
  DriveResult drive;
};

LoopResult loopback(const DriveConfig& drive_cfg, ServeConfig serve_cfg) {
  const Scenario sc = still_scenario();
  NmpcController ctl(toy_model(), light_config(), 1);
  UdpSocket server("127.0.0.1", 0);
  UdpSocket plant("127.0.0.1", 0);
  std::atomic<bool> stop{false};
  serve_cfg.max_packets = drive_cfg.cycles;
  LoopResult r;
  std::thread t([&] { r.serve = udp_serve(server, ctl, sc, serve_cfg, stop); });
  DriveConfig dc = drive_cfg;
  dc.port = server.port();
  r.drive = udp_drive(plant, PlantParams{}, sc, dc);
  stop = true;
  t.join();
  return r;
}

}  // namespace

TEST_CASE("udp loopback: lossless run answers every tick in order") {
  DriveConfig dc;
  dc.cycles = 500;
  const LoopResult r = loopback(dc, ServeConfig{});
  REQUIRE(r.drive.ticks.size() == 500);
  CHECK(r.serve.replied == 500);
  for (std::size_t k = 0; k < r.serve.reply_sequences.size(); ++k) CHECK(r.serve.reply_sequences[k] == k + 1);
  for (const DriveTick& t : r.drive.ticks) CHECK(t.source == TickSource::Fresh);
  CHECK(r.drive.held == 0);
  CHECK(r.drive.malformed == 0);
}

TEST_CASE("udp loopback: dropped ticks hold the last command, silence zeroes valves") {
  DriveConfig dc;
  dc.cycles = 300;
  dc.drop_rate = 0.1;
  dc.drop_seed = 9;
  dc.reply_timeout_ms = 30;
  ServeConfig sc;
  sc.silent_sequences = {{150, 220}};  // 70 ticks = 1.4 s without replies
  const LoopResult r = loopback(dc, sc);
  const auto drops = drop_schedule(300, 0.1, 9);
  std::size_t failsafe = 0;
  for (std::size_t k = 0; k < r.drive.ticks.size(); ++k) {
    const DriveTick& t = r.drive.ticks[k];
    const std::uint32_t seq = t.sequence;
    const bool silent = seq >= 150 && seq < 220;
    if (!silent && !drops[k]) {
      CHECK(t.source == TickSource::Fresh);
      continue;
    }
    if (!silent) {
      CHECK(t.source == TickSource::Dropped);
      CHECK(t.applied == r.drive.ticks[k - 1].applied);
      continue;
    }
    if (t.source == TickSource::Failsafe) {
      ++failsafe;
      CHECK(t.applied.head<3>().norm() == 0.0);
    }
  }
  // Find the last accepted tick before the silence; failsafe starts 50 ticks later.
  std::size_t last_fresh = 148;
  while (r.drive.ticks[last_fresh].source != TickSource::Fresh) --last_fresh;
  const std::size_t first_failsafe = last_fresh + 50;
  CHECK(r.drive.ticks[first_failsafe - 1].source != TickSource::Failsafe);
  CHECK(r.drive.ticks[first_failsafe].source == TickSource::Failsafe);
  CHECK(failsafe == 219 - first_failsafe);
  CHECK(r.serve.silenced == 70);
}

TEST_CASE("udp serve: malformed and stale packets are counted and ignored") {
  const Scenario sc = still_scenario();
  NmpcController ctl(toy_model(), light_config(), 1);
  UdpSocket server("127.0.0.1", 0);
  UdpSocket client("127.0.0.1", 0);
  std::atomic<bool> stop{false};
  ServeConfig cfg;
  cfg.max_packets = 2;
  ServeStats stats;
  std::thread t([&] { stats = udp_serve(server, ctl, sc, cfg, stop); });
  const std::uint8_t junk[5] = {'X', 'Y', 1, 2, 3};
  client.send_to("127.0.0.1", server.port(), junk, sizeof(junk));
  auto send = [&](std::uint32_t seq) {
    const auto b = encode_state(state_packet(seq, 0.02 * seq, StateVector::Zero()));
    client.send_to("127.0.0.1", server.port(), b.data(), b.size());
  };
  std::array<std::uint8_t, 64> buf{};
  send(5);
  CHECK(client.receive(buf.data(), buf.size(), 2000) == 33);
  send(4);
  send(6);
  CHECK(client.receive(buf.data(), buf.size(), 2000) == 33);
  CHECK(decode_command(std::span<const std::uint8_t>(buf.data(), 33))->sequence == 6);
  t.join();
  CHECK(stats.malformed == 1);
  CHECK(stats.stale == 1);
  CHECK(stats.replied == 2);
  CHECK_THROWS_AS(UdpSocket("127.0.0.1", server.port()), Error);
}
