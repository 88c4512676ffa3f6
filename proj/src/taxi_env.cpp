#include "vrail/taxi_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace vrail::taxi {

namespace {

// Vertical wall segments: a wall sits on the east side of (row, col).
struct WallSegment {
  int row;
  int col;
};
constexpr std::array<WallSegment, 6> kEastWalls = {
    WallSegment{0, 1}, WallSegment{1, 1},                     // 1|2 in rows 0-1
    WallSegment{3, 0}, WallSegment{4, 0},                     // 0|1 in rows 3-4
    WallSegment{3, 2}, WallSegment{4, 2}};                    // 2|3 in rows 3-4

bool wall_east_of(int row, int col) {
  return std::any_of(kEastWalls.begin(), kEastWalls.end(),
                     [&](const WallSegment& w) { return w.row == row && w.col == col; });
}

bool in_range(int v, int lo, int hi) { return v >= lo && v <= hi; }

std::string describe(const TaxiState& s) {
  std::ostringstream os;
  os << "(row=" << s.taxi_row << ", col=" << s.taxi_col << ", pass=" << s.passenger_loc
     << ", dest=" << s.destination << ")";
  return os.str();
}

}  // namespace

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw std::out_of_range("action index " + std::to_string(index) + " outside 0..5");
  }
  return static_cast<Action>(index);
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::South: return "South";
    case Action::North: return "North";
    case Action::East: return "East";
    case Action::West: return "West";
    case Action::Pickup: return "Pickup";
    case Action::Dropoff: return "Dropoff";
  }
  return "?";
}

bool TaxiState::valid() const {
  return in_range(taxi_row, 0, kGridSize - 1) && in_range(taxi_col, 0, kGridSize - 1) &&
         in_range(passenger_loc, 0, kInTaxi) && in_range(destination, 0, kNumLandmarks - 1);
}

void EnvConfig::validate() const {
  if (max_episode_steps < 1) {
    throw std::invalid_argument("max_episode_steps must be >= 1");
  }
}

int encode_state(const TaxiState& s) {
  if (!s.valid()) {
    throw InvalidState("invalid taxi state " + describe(s));
  }
  return ((s.taxi_row * kGridSize + s.taxi_col) * 5 + s.passenger_loc) * kNumLandmarks +
         s.destination;
}

TaxiState decode_state(int index) {
  if (index < 0 || index >= kNumStates) {
    throw InvalidState("state index " + std::to_string(index) + " outside 0..499");
  }
  TaxiState s;
  s.destination = index % kNumLandmarks;
  index /= kNumLandmarks;
  s.passenger_loc = index % 5;
  index /= 5;
  s.taxi_col = index % kGridSize;
  s.taxi_row = index / kGridSize;
  return s;
}

bool is_blocked(Cell cell, Action a) {
  switch (a) {
    case Action::South: return cell.row == kGridSize - 1;
    case Action::North: return cell.row == 0;
    case Action::East: return cell.col == kGridSize - 1 || wall_east_of(cell.row, cell.col);
    case Action::West: return cell.col == 0 || wall_east_of(cell.row, cell.col - 1);
    case Action::Pickup:
    case Action::Dropoff: return false;
  }
  return false;
}

StepOutcome step(const TaxiState& s, Action a, const EnvConfig& cfg) {
  if (!s.valid()) {
    throw InvalidState("invalid taxi state " + describe(s));
  }
  StepOutcome out{s, cfg.sparse_rewards ? 0.0 : kStepReward, false};
  const Cell taxi = s.taxi();
  switch (a) {
    case Action::South:
      if (!is_blocked(taxi, a)) ++out.next_state.taxi_row;
      break;
    case Action::North:
      if (!is_blocked(taxi, a)) --out.next_state.taxi_row;
      break;
    case Action::East:
      if (!is_blocked(taxi, a)) ++out.next_state.taxi_col;
      break;
    case Action::West:
      if (!is_blocked(taxi, a)) --out.next_state.taxi_col;
      break;
    case Action::Pickup:
      if (s.passenger_loc != kInTaxi && kLandmarks[s.passenger_loc] == taxi) {
        out.next_state.passenger_loc = kInTaxi;
      } else {
        out.reward = kIllegalActionReward;
      }
      break;
    case Action::Dropoff:
      if (s.passenger_loc == kInTaxi && kLandmarks[s.destination] == taxi) {
        out.next_state.passenger_loc = s.destination;
        out.reward = kSuccessReward;
        out.terminal = true;
      } else if (s.passenger_loc == kInTaxi) {
        // Dropping at another landmark leaves the passenger there, as in Taxi-v3.
        auto it = std::find(kLandmarks.begin(), kLandmarks.end(), taxi);
        if (it != kLandmarks.end()) {
          out.next_state.passenger_loc = static_cast<int>(it - kLandmarks.begin());
        } else {
          out.reward = kIllegalActionReward;
        }
      } else {
        out.reward = kIllegalActionReward;
      }
      break;
  }
  return out;
}

const std::vector<TaxiState>& start_states() {
  static const std::vector<TaxiState> starts = [] {
    std::vector<TaxiState> v;
    v.reserve(kNumStartStates);
    for (int i = 0; i < kNumStates; ++i) {
      TaxiState s = decode_state(i);
      if (s.passenger_loc != kInTaxi && s.passenger_loc != s.destination) v.push_back(s);
    }
    return v;
  }();
  return starts;
}

bool is_start_state(const TaxiState& s) {
  return s.valid() && s.passenger_loc != kInTaxi && s.passenger_loc != s.destination;
}

TaxiState reset(std::mt19937_64& rng) {
  const auto& starts = start_states();
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  return starts[pick(rng)];
}

TaxiState reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return reset(rng);
}

void extract_features_into(const TaxiState& s, const EnvConfig& cfg, std::span<double> out) {
  if (out.size() != cfg.feature_dim()) {
    throw std::invalid_argument("feature buffer has " + std::to_string(out.size()) +
                                " entries, expected " + std::to_string(cfg.feature_dim()));
  }
  if (!s.valid()) {
    throw InvalidState("invalid taxi state " + describe(s));
  }
  std::fill(out.begin(), out.end(), 0.0);
  out[static_cast<std::size_t>(s.taxi_row)] = 1.0;
  out[5 + static_cast<std::size_t>(s.taxi_col)] = 1.0;
  out[10 + static_cast<std::size_t>(s.passenger_loc)] = 1.0;
  out[15 + static_cast<std::size_t>(s.destination)] = 1.0;
  if (cfg.wall_features) {
    const Cell taxi = s.taxi();
    out[19] = is_blocked(taxi, Action::North) ? 1.0 : 0.0;
    out[20] = is_blocked(taxi, Action::South) ? 1.0 : 0.0;
    out[21] = is_blocked(taxi, Action::East) ? 1.0 : 0.0;
    out[22] = is_blocked(taxi, Action::West) ? 1.0 : 0.0;
  }
}

FeatureVector extract_features(const TaxiState& s, const EnvConfig& cfg) {
  FeatureVector x(cfg.feature_dim());
  extract_features_into(s, cfg, x);
  return x;
}

std::vector<std::string> feature_names(const EnvConfig& cfg) {
  std::vector<std::string> names;
  for (int r = 0; r < kGridSize; ++r) names.push_back("row" + std::to_string(r));
  for (int c = 0; c < kGridSize; ++c) names.push_back("col" + std::to_string(c));
  for (const char* p : {"P: R", "P: G", "P: Y", "P: B", "P: T"}) names.emplace_back(p);
  for (const char* d : {"D: R", "D: G", "D: Y", "D: B"}) names.emplace_back(d);
  if (cfg.wall_features) {
    for (const char* w : {"wall N", "wall S", "wall E", "wall W"}) names.emplace_back(w);
  }
  return names;
}

std::vector<double> feature_table(const EnvConfig& cfg) {
  const std::size_t dim = cfg.feature_dim();
  std::vector<double> table(dim * kNumStates);
  for (int i = 0; i < kNumStates; ++i) {
    extract_features_into(decode_state(i), cfg,
                          std::span<double>(table).subspan(static_cast<std::size_t>(i) * dim, dim));
  }
  return table;
}

ValueIterationResult value_iteration(const EnvConfig& cfg, double gamma,
                                     const StatePotential& potential,
                                     ValueIterationOptions options) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  struct Edge {
    int next;
    double reward;
    bool terminal;
  };
  std::vector<std::array<Edge, kNumActions>> edges(kNumStates);
  std::vector<double> phi(kNumStates, 0.0);
  if (potential) {
    for (int i = 0; i < kNumStates; ++i) phi[i] = potential(i);
  }
  for (int i = 0; i < kNumStates; ++i) {
    const TaxiState s = decode_state(i);
    for (Action a : kAllActions) {
      const StepOutcome o = step(s, a, cfg);
      const int next = encode_state(o.next_state);
      double r = o.reward;
      if (potential) {
        r += gamma * (o.terminal ? 0.0 : phi[next]) - phi[i];
      }
      edges[i][to_index(a)] = {next, r, o.terminal};
    }
  }

  ValueIterationResult result;
  result.values.assign(kNumStates, 0.0);
  result.q.assign(kNumStates, {});
  std::vector<double> next_values(kNumStates);
  for (int it = 1; it <= options.max_iterations; ++it) {
    double delta = 0.0;
    for (int i = 0; i < kNumStates; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        const Edge& e = edges[i][a];
        const double q = e.reward + (e.terminal ? 0.0 : gamma * result.values[e.next]);
        result.q[i][a] = q;
        best = std::max(best, q);
      }
      next_values[i] = best;
      delta = std::max(delta, std::abs(best - result.values[i]));
    }
    result.values.swap(next_values);
    result.iterations = it;
    if (delta <= options.tolerance) {
      result.policy.resize(kNumStates);
      for (int i = 0; i < kNumStates; ++i) {
        const auto& row = result.q[i];
        result.policy[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      }
      return result;
    }
  }
  throw NonConvergence("value iteration did not reach tolerance " +
                       std::to_string(options.tolerance) + " within " +
                       std::to_string(options.max_iterations) + " iterations");
}

void dump_transitions(std::ostream& out, const EnvConfig& cfg) {
  out << "state_index,action,next_index,reward,terminal\n";
  for (int i = 0; i < kNumStates; ++i) {
    const TaxiState s = decode_state(i);
    for (Action a : kAllActions) {
      const StepOutcome o = step(s, a, cfg);
      out << i << ',' << to_index(a) << ',' << encode_state(o.next_state) << ','
          << static_cast<long long>(o.reward) << ',' << (o.terminal ? 1 : 0) << '\n';
    }
  }
}

}  // namespace vrail::taxi
