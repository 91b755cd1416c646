#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "agesir/model.hpp"
#include "agesir/rng.hpp"

namespace agesir {

enum class Disease : signed char { recovered = -1, susceptible = 0, infected = 1 };
enum class SimMode { dense, lazy };

struct EventRecord {
  enum class Kind { infection, recovery, edge_update };
  double time = 0.0;
  Kind kind = Kind::infection;
  int node_a = -1;     // infected/recovered node, or the edge target a
  int node_b = -1;     // edge source b; -1 for disease events
  int new_state = -1;  // edge state after the update; -1 for disease events
};

using EventLog = std::vector<EventRecord>;

/// Last draw of a pair's edge state, used to propagate it lazily.
struct EdgeObservation {
  std::uint8_t bit = 0;
  double time = 0.0;
};

/// Ordered pairs (a, b), a != b, numbered lexicographically 0..n(n-1)-1.
/// bit(a, b) == 1 means the network has a directed edge from b to a, i.e. b
/// can transmit to a.
inline long pair_index(int a, int b, long n) {
  return static_cast<long>(a) * (n - 1) + b - (b > a ? 1 : 0);
}

inline std::pair<int, int> pair_from_index(long idx, long n) {
  const int a = static_cast<int>(idx / (n - 1));
  const long rem = idx % (n - 1);
  const int b = static_cast<int>(rem + (rem >= a ? 1 : 0));
  return {a, b};
}

/// Advances a pair's edge state to the given time. A pair never observed
/// before is a fresh Bernoulli(q) draw. Otherwise the prior bit survives with
/// probability e^{-lambda gap} (no update fired in between); else the state
/// is re-drawn Bernoulli(q).
inline std::uint8_t propagate_edge(const std::optional<EdgeObservation>& prior, double now,
                                   double lambda, double q, Rng& rng) {
  if (!prior) return rng.bernoulli(q) ? 1 : 0;
  const double gap = now - prior->time;
  if (gap < 0.0) throw std::invalid_argument("propagate_edge: observation from the future");
  if (rng.bernoulli(std::exp(-lambda * gap))) return prior->bit;
  return rng.bernoulli(q) ? 1 : 0;
}

namespace detail {

// A channel is an ordered (susceptible target, infected source) pair whose
// edge process is simulated explicitly. Dead channels linger in the pool and
// in the per-node id lists until reused; buckets only ever hold live ones.
struct Channel {
  int target = -1;
  int source = -1;
  std::uint8_t bit = 0;
  bool alive = false;
  int bucket = -1;
  int bucket_pos = -1;
  double last_observed = 0.0;
};

}  // namespace detail

constexpr int kMaxGroups = 64;

/// State of one realization of the Markov chain. Dense mode tracks every
/// directed edge bit; lazy mode tracks only the channels that can influence
/// the disease dynamics, drawing edge states on demand via propagate_edge.
struct NetworkState {
  SimMode mode = SimMode::dense;
  long n = 0;
  int m = 0;
  std::vector<Disease> disease;
  std::vector<int> group_of;
  std::vector<long> count_s, count_i, count_r;  // per group
  double clock = 0.0;
  Rng rng{0};

  // Dense storage: one bit per ordered pair, plus the infection rate of every
  // susceptible node and its running total.
  std::vector<std::uint8_t> edge_bits;
  std::vector<double> inf_rate;
  double total_inf_rate = 0.0;
  long events_since_refresh = 0;

  // Lazy storage.
  std::vector<detail::Channel> pool;
  std::vector<int> free_slots;
  std::vector<std::vector<int>> buckets;            // (i*m + j)*2 + bit
  std::vector<std::vector<int>> target_channels;    // per node, may hold dead ids
  std::vector<std::vector<int>> source_channels;    // per node, may hold dead ids
  std::vector<std::vector<int>> infected_by_group;  // recovery scan lists
  std::vector<int> infected_pos;                    // node -> position in its group list

  long infected_total() const {
    long total = 0;
    for (long c : count_i) total += c;
    return total;
  }

  GroupFractions fractions() const {
    GroupFractions f;
    f.s.resize(m);
    f.beta.resize(m);
    f.r.resize(m);
    const double inv = 1.0 / static_cast<double>(n);
    for (int i = 0; i < m; ++i) {
      f.s[i] = static_cast<double>(count_s[i]) * inv;
      f.beta[i] = static_cast<double>(count_i[i]) * inv;
      f.r[i] = static_cast<double>(count_r[i]) * inv;
    }
    return f;
  }
};

namespace detail {

inline double edge_prob(const ModelParams& p, int gi, int gj, long n) {
  return p.rho[gi][gj] / static_cast<double>(n);
}

inline int bucket_id(int gi, int gj, int bit, int m) { return (gi * m + gj) * 2 + bit; }

inline void bucket_insert(NetworkState& st, int chan_id) {
  Channel& ch = st.pool[chan_id];
  const int bid = bucket_id(st.group_of[ch.target], st.group_of[ch.source], ch.bit, st.m);
  ch.bucket = bid;
  ch.bucket_pos = static_cast<int>(st.buckets[bid].size());
  st.buckets[bid].push_back(chan_id);
}

inline void bucket_remove(NetworkState& st, int chan_id) {
  Channel& ch = st.pool[chan_id];
  std::vector<int>& vec = st.buckets[ch.bucket];
  const int last = vec.back();
  vec[ch.bucket_pos] = last;
  st.pool[last].bucket_pos = ch.bucket_pos;
  vec.pop_back();
  ch.bucket = -1;
  ch.bucket_pos = -1;
}

inline void bucket_move(NetworkState& st, int chan_id, int new_bit) {
  bucket_remove(st, chan_id);
  st.pool[chan_id].bit = static_cast<std::uint8_t>(new_bit);
  bucket_insert(st, chan_id);
}

inline void retire_channel(NetworkState& st, int chan_id) {
  Channel& ch = st.pool[chan_id];
  if (!ch.alive) return;
  bucket_remove(st, chan_id);
  ch.alive = false;
  st.free_slots.push_back(chan_id);
}

// Creates the channel for pair (target, source), drawing its edge state via
// propagate_edge. Pairs reach channel status at most once, because disease
// states only ever move S -> I -> R, so the draw is always the
// fresh-Bernoulli path.
inline void create_channel(NetworkState& st, const ModelParams& p, int target, int source) {
  const double q = edge_prob(p, st.group_of[target], st.group_of[source], st.n);
  const std::uint8_t bit = propagate_edge(std::nullopt, st.clock, p.lambda_edge, q, st.rng);
  int id;
  if (!st.free_slots.empty()) {
    id = st.free_slots.back();
    st.free_slots.pop_back();
  } else {
    id = static_cast<int>(st.pool.size());
    st.pool.emplace_back();
  }
  Channel& ch = st.pool[id];
  ch.target = target;
  ch.source = source;
  ch.bit = bit;
  ch.alive = true;
  ch.last_observed = st.clock;
  bucket_insert(st, id);
  st.target_channels[target].push_back(id);
  st.source_channels[source].push_back(id);
}

inline void lazy_mark_infected(NetworkState& st, const ModelParams& p, int node) {
  // Retire every channel that had this node as its susceptible target.
  for (int id : st.target_channels[node]) {
    if (st.pool[id].alive && st.pool[id].target == node) retire_channel(st, id);
  }
  st.target_channels[node].clear();

  const int g = st.group_of[node];
  st.disease[node] = Disease::infected;
  --st.count_s[g];
  ++st.count_i[g];
  st.infected_pos[node] = static_cast<int>(st.infected_by_group[g].size());
  st.infected_by_group[g].push_back(node);

  // Open a channel toward every remaining susceptible node.
  for (int c = 0; c < st.n; ++c) {
    if (st.disease[c] == Disease::susceptible) create_channel(st, p, c, node);
  }
}

inline void lazy_mark_recovered(NetworkState& st, int node) {
  const int g = st.group_of[node];
  std::vector<int>& group_list = st.infected_by_group[g];
  const int pos = st.infected_pos[node];
  const int last = group_list.back();
  group_list[pos] = last;
  st.infected_pos[last] = pos;
  group_list.pop_back();
  st.infected_pos[node] = -1;

  st.disease[node] = Disease::recovered;
  --st.count_i[g];
  ++st.count_r[g];

  for (int id : st.source_channels[node]) {
    if (st.pool[id].alive && st.pool[id].source == node) retire_channel(st, id);
  }
  st.source_channels[node].clear();
}

}  // namespace detail

/// Builds the initial network: the first `initial_infected[i]` nodes of each
/// group start infected, everyone else susceptible. Dense mode draws every
/// ordered pair's edge bit independently Bernoulli(rho_ij / n); lazy mode
/// opens channels for the initial (susceptible, infected) pairs and stores
/// nothing else.
inline NetworkState init_network(const ModelParams& p, const std::vector<long>& initial_infected,
                                 std::uint64_t seed, SimMode mode = SimMode::dense) {
  if (!p.has_network() || p.group_sizes.empty())
    throw std::invalid_argument("init_network: params lack B, rho or group_sizes");
  if (p.m > kMaxGroups) throw std::invalid_argument("init_network: too many groups");
  if (static_cast<int>(initial_infected.size()) != p.m)
    throw std::invalid_argument("init_network: initial_infected dimension mismatch");
  for (int i = 0; i < p.m; ++i)
    if (initial_infected[i] < 0 || initial_infected[i] > p.group_sizes[i])
      throw std::invalid_argument("init_network: infected count exceeds group size");

  NetworkState st;
  st.mode = mode;
  st.m = p.m;
  st.n = p.total_population();
  st.rng = Rng(seed);
  st.disease.assign(st.n, Disease::susceptible);
  st.group_of.resize(st.n);
  st.count_s.assign(p.m, 0);
  st.count_i.assign(p.m, 0);
  st.count_r.assign(p.m, 0);

  long node = 0;
  for (int g = 0; g < p.m; ++g) {
    for (long k = 0; k < p.group_sizes[g]; ++k, ++node) {
      st.group_of[node] = g;
      if (k < initial_infected[g]) {
        st.disease[node] = Disease::infected;
        ++st.count_i[g];
      } else {
        ++st.count_s[g];
      }
    }
  }

  if (mode == SimMode::dense) {
    st.edge_bits.assign(st.n * (st.n - 1), 0);
    for (int a = 0; a < st.n; ++a) {
      for (int b = 0; b < st.n; ++b) {
        if (a == b) continue;
        const double q = detail::edge_prob(p, st.group_of[a], st.group_of[b], st.n);
        st.edge_bits[pair_index(a, b, st.n)] = st.rng.bernoulli(q) ? 1 : 0;
      }
    }
    st.inf_rate.assign(st.n, 0.0);
    st.total_inf_rate = 0.0;
    for (int a = 0; a < st.n; ++a) {
      if (st.disease[a] != Disease::susceptible) continue;
      double rate = 0.0;
      for (int b = 0; b < st.n; ++b) {
        if (b == a || st.disease[b] != Disease::infected) continue;
        if (st.edge_bits[pair_index(a, b, st.n)]) rate += p.B[st.group_of[a]][st.group_of[b]];
      }
      st.inf_rate[a] = rate;
      st.total_inf_rate += rate;
    }
  } else {
    st.buckets.assign(static_cast<std::size_t>(p.m) * p.m * 2, {});
    st.target_channels.assign(st.n, {});
    st.source_channels.assign(st.n, {});
    st.infected_by_group.assign(p.m, {});
    st.infected_pos.assign(st.n, -1);
    for (int b = 0; b < st.n; ++b) {
      if (st.disease[b] != Disease::infected) continue;
      const int g = st.group_of[b];
      st.infected_pos[b] = static_cast<int>(st.infected_by_group[g].size());
      st.infected_by_group[g].push_back(b);
      for (int a = 0; a < st.n; ++a) {
        if (st.disease[a] == Disease::susceptible) detail::create_channel(st, p, a, b);
      }
    }
  }
  return st;
}

/// Effective rate at which a susceptible node gets infected: the sum of
/// B[i][k] over its on-edges from infected group-k nodes.
inline double infection_rate_of(const NetworkState& st, const ModelParams& p, int node) {
  if (st.disease[node] != Disease::susceptible)
    throw std::invalid_argument("infection_rate_of: node not susceptible");
  double rate = 0.0;
  if (st.mode == SimMode::dense) {
    for (int b = 0; b < st.n; ++b) {
      if (b == node || st.disease[b] != Disease::infected) continue;
      if (st.edge_bits[pair_index(node, b, st.n)]) rate += p.B[st.group_of[node]][st.group_of[b]];
    }
  } else {
    for (int id : st.target_channels[node]) {
      const detail::Channel& ch = st.pool[id];
      if (ch.alive && ch.target == node && ch.bit)
        rate += p.B[st.group_of[node]][st.group_of[ch.source]];
    }
  }
  return rate;
}

namespace detail {

inline void dense_apply_infection(NetworkState& st, const ModelParams& p, int node) {
  const int g = st.group_of[node];
  st.total_inf_rate -= st.inf_rate[node];
  if (st.total_inf_rate < 0.0) st.total_inf_rate = 0.0;
  st.inf_rate[node] = 0.0;
  st.disease[node] = Disease::infected;
  --st.count_s[g];
  ++st.count_i[g];
  for (int c = 0; c < st.n; ++c) {
    if (st.disease[c] != Disease::susceptible) continue;
    if (st.edge_bits[pair_index(c, node, st.n)]) {
      const double b = p.B[st.group_of[c]][g];
      st.inf_rate[c] += b;
      st.total_inf_rate += b;
    }
  }
}

inline void dense_apply_recovery(NetworkState& st, const ModelParams& p, int node) {
  const int g = st.group_of[node];
  st.disease[node] = Disease::recovered;
  --st.count_i[g];
  ++st.count_r[g];
  for (int c = 0; c < st.n; ++c) {
    if (st.disease[c] != Disease::susceptible) continue;
    if (st.edge_bits[pair_index(c, node, st.n)]) {
      const double b = p.B[st.group_of[c]][g];
      st.inf_rate[c] -= b;
      if (st.inf_rate[c] < 0.0 && st.inf_rate[c] > -1e-12) st.inf_rate[c] = 0.0;
      st.total_inf_rate -= b;
    }
  }
  if (st.total_inf_rate < 0.0) st.total_inf_rate = 0.0;
}

inline void dense_refresh_totals(NetworkState& st) {
  double total = 0.0;
  for (int a = 0; a < st.n; ++a)
    if (st.disease[a] == Disease::susceptible) total += st.inf_rate[a];
  st.total_inf_rate = total;
}

}  // namespace detail

/// One exact Gillespie step of the dense chain: draws the holding time from
/// the total rate, then selects the event by a cumulative scan over
/// infections (node order), recoveries (node order), and edge updates (pair
/// order; all pairs share rate lambda, so the scan reduces to an index
/// computation). Returns nullopt only in the absorbing rate-free case.
inline std::optional<EventRecord> step_dense(NetworkState& st, const ModelParams& p) {
  if (st.mode != SimMode::dense) throw std::invalid_argument("step_dense: state not dense");
  if (++st.events_since_refresh >= 65536) {
    detail::dense_refresh_totals(st);
    st.events_since_refresh = 0;
  }

  double rec_total = 0.0;
  for (int g = 0; g < st.m; ++g) rec_total += p.gamma[g] * static_cast<double>(st.count_i[g]);
  const double pairs = static_cast<double>(st.n) * static_cast<double>(st.n - 1);
  const double edge_total = p.lambda_edge * pairs;
  const double total = st.total_inf_rate + rec_total + edge_total;
  if (!(total > 0.0)) return std::nullopt;

  const double hold = st.rng.exponential(total);
  double offset = st.rng.uniform() * total;
  st.clock += hold;

  EventRecord ev;
  ev.time = st.clock;

  if (offset < st.total_inf_rate) {
    int chosen = -1;
    for (int a = 0; a < st.n; ++a) {
      if (st.disease[a] != Disease::susceptible || st.inf_rate[a] <= 0.0) continue;
      chosen = a;
      if (offset < st.inf_rate[a]) break;
      offset -= st.inf_rate[a];
    }
    if (chosen >= 0) {
      ev.kind = EventRecord::Kind::infection;
      ev.node_a = chosen;
      detail::dense_apply_infection(st, p, chosen);
      return ev;
    }
    // Accumulated totals drifted past the true sum; fall through to an edge
    // update drawn uniformly, after a refresh.
    detail::dense_refresh_totals(st);
    offset = st.rng.uniform() * edge_total;
  } else {
    offset -= st.total_inf_rate;
    if (offset < rec_total) {
      int chosen = -1;
      for (int a = 0; a < st.n; ++a) {
        if (st.disease[a] != Disease::infected) continue;
        chosen = a;
        const double g = p.gamma[st.group_of[a]];
        if (offset < g) break;
        offset -= g;
      }
      ev.kind = EventRecord::Kind::recovery;
      ev.node_a = chosen;
      detail::dense_apply_recovery(st, p, chosen);
      return ev;
    }
    offset -= rec_total;
  }

  long idx = static_cast<long>(offset / p.lambda_edge);
  if (idx >= st.n * (st.n - 1)) idx = st.n * (st.n - 1) - 1;
  if (idx < 0) idx = 0;
  const auto [a, b] = pair_from_index(idx, st.n);
  const double q = detail::edge_prob(p, st.group_of[a], st.group_of[b], st.n);
  const std::uint8_t fresh = st.rng.bernoulli(q) ? 1 : 0;
  const std::uint8_t old = st.edge_bits[idx];
  st.edge_bits[idx] = fresh;
  if (fresh != old && st.disease[a] == Disease::susceptible &&
      st.disease[b] == Disease::infected) {
    const double bij = p.B[st.group_of[a]][st.group_of[b]];
    if (fresh) {
      st.inf_rate[a] += bij;
      st.total_inf_rate += bij;
    } else {
      st.inf_rate[a] -= bij;
      if (st.inf_rate[a] < 0.0 && st.inf_rate[a] > -1e-12) st.inf_rate[a] = 0.0;
      st.total_inf_rate -= bij;
      if (st.total_inf_rate < 0.0) st.total_inf_rate = 0.0;
    }
  }
  ev.kind = EventRecord::Kind::edge_update;
  ev.node_a = a;
  ev.node_b = b;
  ev.new_state = fresh;
  return ev;
}

namespace detail {

// One Gillespie step of the lazy chain. Channel updates that re-draw the
// current edge state are thinned out of the event stream: an off channel
// turns on at rate lambda q, an on channel turns off at rate lambda (1 - q)
// and transmits at rate B while on. Returns false when the state is
// absorbing (no infected nodes remain).
inline bool step_lazy(NetworkState& st, const ModelParams& p, EventRecord& ev) {
  const int m = st.m;
  std::array<double, kMaxGroups> rec_rates;
  double total = 0.0;
  for (int g = 0; g < m; ++g) {
    rec_rates[g] = p.gamma[g] * static_cast<double>(st.infected_by_group[g].size());
    total += rec_rates[g];
  }
  const long n = st.n;
  for (int gi = 0; gi < m; ++gi) {
    for (int gj = 0; gj < m; ++gj) {
      const double q = edge_prob(p, gi, gj, n);
      total += p.lambda_edge * q * static_cast<double>(st.buckets[bucket_id(gi, gj, 0, m)].size());
      total += (p.B[gi][gj] + p.lambda_edge * (1.0 - q)) *
               static_cast<double>(st.buckets[bucket_id(gi, gj, 1, m)].size());
    }
  }
  if (!(total > 0.0)) return false;

  const double hold = st.rng.exponential(total);
  double offset = st.rng.uniform() * total;
  st.clock += hold;
  ev.time = st.clock;

  for (int g = 0; g < m; ++g) {
    if (offset < rec_rates[g]) {
      long k = static_cast<long>(offset / p.gamma[g]);
      const long size = static_cast<long>(st.infected_by_group[g].size());
      if (k >= size) k = size - 1;
      const int node = st.infected_by_group[g][k];
      ev.kind = EventRecord::Kind::recovery;
      ev.node_a = node;
      lazy_mark_recovered(st, node);
      return true;
    }
    offset -= rec_rates[g];
  }

  for (int gi = 0; gi < m; ++gi) {
    for (int gj = 0; gj < m; ++gj) {
      const double q = edge_prob(p, gi, gj, n);
      for (int bit = 0; bit <= 1; ++bit) {
        const double member_rate =
            bit ? p.B[gi][gj] + p.lambda_edge * (1.0 - q) : p.lambda_edge * q;
        std::vector<int>& bucket = st.buckets[bucket_id(gi, gj, bit, m)];
        const double bucket_total = member_rate * static_cast<double>(bucket.size());
        if (offset >= bucket_total) {
          offset -= bucket_total;
          continue;
        }
        long k = static_cast<long>(offset / member_rate);
        if (k >= static_cast<long>(bucket.size())) k = static_cast<long>(bucket.size()) - 1;
        const int chan_id = bucket[k];
        Channel& ch = st.pool[chan_id];
        if (bit == 0) {
          // Update that re-drew the edge as present.
          bucket_move(st, chan_id, 1);
          ch.last_observed = st.clock;
          ev.kind = EventRecord::Kind::edge_update;
          ev.node_a = ch.target;
          ev.node_b = ch.source;
          ev.new_state = 1;
          return true;
        }
        const double within = offset - static_cast<double>(k) * member_rate;
        if (within < p.B[gi][gj]) {
          ev.kind = EventRecord::Kind::infection;
          ev.node_a = ch.target;
          lazy_mark_infected(st, p, ch.target);
          return true;
        }
        // Update that re-drew the edge as absent.
        bucket_move(st, chan_id, 0);
        ch.last_observed = st.clock;
        ev.kind = EventRecord::Kind::edge_update;
        ev.node_a = ch.target;
        ev.node_b = ch.source;
        ev.new_state = 0;
        return true;
      }
    }
  }
  // Rounding pushed the offset past the last bucket; emit a no-op tick.
  ev.kind = EventRecord::Kind::edge_update;
  ev.node_a = -1;
  ev.node_b = -1;
  ev.new_state = -1;
  return true;
}

}  // namespace detail

/// Runs the chain to t_end, sampling group fractions every sample_dt (the
/// grid extends to the first point >= t_end; samples at an event time see the
/// post-event state). Identical seeds give identical event logs. When
/// record_events is false the dense engine stops once no infected nodes
/// remain, since the remaining edge churn cannot change the trajectory.
inline std::pair<Trajectory, EventLog> simulate(NetworkState& st, const ModelParams& p,
                                                double t_end, double sample_dt, SimMode mode,
                                                bool record_events = true) {
  if (mode != st.mode) throw std::invalid_argument("simulate: mode does not match state");
  if (!(sample_dt > 0.0)) throw std::invalid_argument("simulate: sample_dt must be positive");

  const long samples =
      (t_end == 0.0) ? 0 : static_cast<long>(std::ceil(t_end / sample_dt - 1e-12));
  const double horizon = static_cast<double>(samples) * sample_dt;
  Trajectory traj;
  traj.times.reserve(samples + 1);
  traj.states.reserve(samples + 1);
  EventLog log;

  long next_sample = 0;
  std::vector<long> snap_s(st.m), snap_i(st.m), snap_r(st.m);
  const double inv_n = 1.0 / static_cast<double>(st.n);
  auto emit_snapshot = [&]() {
    GroupFractions f;
    f.s.resize(st.m);
    f.beta.resize(st.m);
    f.r.resize(st.m);
    for (int i = 0; i < st.m; ++i) {
      f.s[i] = static_cast<double>(snap_s[i]) * inv_n;
      f.beta[i] = static_cast<double>(snap_i[i]) * inv_n;
      f.r[i] = static_cast<double>(snap_r[i]) * inv_n;
    }
    traj.times.push_back(static_cast<double>(next_sample) * sample_dt);
    traj.states.push_back(std::move(f));
    ++next_sample;
  };

  while (next_sample <= samples) {
    if (st.mode == SimMode::dense && !record_events && st.infected_total() == 0) break;
    snap_s = st.count_s;
    snap_i = st.count_i;
    snap_r = st.count_r;

    EventRecord ev;
    bool progressed;
    if (st.mode == SimMode::dense) {
      std::optional<EventRecord> step = step_dense(st, p);
      progressed = step.has_value();
      if (progressed) ev = *step;
    } else {
      progressed = detail::step_lazy(st, p, ev);
    }
    if (!progressed) break;  // absorbing: state constant from here on

    while (next_sample <= samples &&
           static_cast<double>(next_sample) * sample_dt < ev.time - 1e-15) {
      emit_snapshot();
    }
    if (ev.time > horizon + 1e-15) {
      st.clock = horizon;
      break;
    }
    if (record_events && ev.node_a >= 0) log.push_back(ev);
  }

  // Fill any remaining grid points with the current (constant) state.
  while (next_sample <= samples) {
    traj.times.push_back(static_cast<double>(next_sample) * sample_dt);
    traj.states.push_back(st.fractions());
    ++next_sample;
  }
  return {std::move(traj), std::move(log)};
}

/// Ensemble statistics over independent runs seeded base_seed + 0..runs-1.
/// The merge is by run index, so results do not depend on execution order.
struct EnsembleResult {
  Trajectory mean;
  std::vector<std::vector<double>> variance;  // [sample][s_1, beta_1, r_1, ...]
  std::vector<GroupFractions> final_states;   // one per run
};

inline EnsembleResult ensemble(const ModelParams& p, const std::vector<long>& initial_infected,
                               SimMode mode, long runs, double t_end, double sample_dt,
                               std::uint64_t base_seed) {
  if (runs < 1) throw std::invalid_argument("ensemble: need at least one run");
  EnsembleResult result;
  std::vector<std::vector<double>> mean_acc;
  std::vector<std::vector<double>> m2_acc;

  for (long k = 0; k < runs; ++k) {
    NetworkState st =
        init_network(p, initial_infected, base_seed + static_cast<std::uint64_t>(k), mode);
    auto [traj, log] = simulate(st, p, t_end, sample_dt, mode, false);
    if (k == 0) {
      result.mean.times = traj.times;
      mean_acc.assign(traj.size(), std::vector<double>(3 * p.m, 0.0));
      m2_acc.assign(traj.size(), std::vector<double>(3 * p.m, 0.0));
    }
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const GroupFractions& f = traj.states[t];
      for (int i = 0; i < p.m; ++i) {
        const double values[3] = {f.s[i], f.beta[i], f.r[i]};
        for (int c = 0; c < 3; ++c) {
          const std::size_t col = 3 * i + c;
          const double delta = values[c] - mean_acc[t][col];
          mean_acc[t][col] += delta / static_cast<double>(k + 1);
          m2_acc[t][col] += delta * (values[c] - mean_acc[t][col]);
        }
      }
    }
    result.final_states.push_back(traj.states.back());
  }

  result.mean.states.resize(result.mean.times.size());
  result.variance.assign(result.mean.times.size(), std::vector<double>(3 * p.m, 0.0));
  for (std::size_t t = 0; t < result.mean.times.size(); ++t) {
    GroupFractions f;
    f.s.resize(p.m);
    f.beta.resize(p.m);
    f.r.resize(p.m);
    for (int i = 0; i < p.m; ++i) {
      f.s[i] = mean_acc[t][3 * i];
      f.beta[i] = mean_acc[t][3 * i + 1];
      f.r[i] = mean_acc[t][3 * i + 2];
    }
    result.mean.states[t] = f;
    if (runs > 1) {
      for (int c = 0; c < 3 * p.m; ++c)
        result.variance[t][c] = m2_acc[t][c] / static_cast<double>(runs - 1);
    }
  }
  return result;
}

}  // namespace agesir
