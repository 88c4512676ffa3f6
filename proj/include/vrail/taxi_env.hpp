#pragma once

// Deterministic 5x5 Taxi gridworld, index-compatible with Gymnasium's Taxi-v3.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vrail::taxi {

inline constexpr int kGridSize = 5;
inline constexpr int kNumStates = 500;
inline constexpr int kNumActions = 6;
inline constexpr int kNumLandmarks = 4;
inline constexpr int kNumStartStates = 300;
inline constexpr int kInTaxi = 4;

inline constexpr std::size_t kBaseFeatureDim = 19;
inline constexpr std::size_t kWallFeatureDim = 23;
/// Feature index of "P: T" (passenger inside the taxi).
inline constexpr std::size_t kPassengerInTaxiFeature = 14;

inline constexpr double kStepReward = -1.0;
inline constexpr double kIllegalActionReward = -10.0;
inline constexpr double kSuccessReward = 20.0;

class InvalidState : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class Action : int { South = 0, North = 1, East = 2, West = 3, Pickup = 4, Dropoff = 5 };

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::South, Action::North, Action::East, Action::West, Action::Pickup, Action::Dropoff};

constexpr int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
std::string_view action_name(Action a);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// R, G, Y, B in that order.
inline constexpr std::array<Cell, kNumLandmarks> kLandmarks = {
    Cell{0, 0}, Cell{0, 4}, Cell{4, 0}, Cell{4, 3}};

struct TaxiState {
  int taxi_row = 0;
  int taxi_col = 0;
  int passenger_loc = 0;  // 0..3 landmark, 4 = in taxi
  int destination = 0;    // 0..3 landmark

  bool valid() const;
  Cell taxi() const { return {taxi_row, taxi_col}; }
  friend bool operator==(const TaxiState&, const TaxiState&) = default;
};

struct EnvConfig {
  bool sparse_rewards = false;
  bool wall_features = false;
  int max_episode_steps = 200;

  std::size_t feature_dim() const { return wall_features ? kWallFeatureDim : kBaseFeatureDim; }
  void validate() const;
};

struct StepOutcome {
  TaxiState next_state;
  double reward = 0.0;
  bool terminal = false;
};

int encode_state(const TaxiState& s);
TaxiState decode_state(int index);

/// True when moving from `cell` in direction `a` is stopped by the boundary or an
/// interior wall. Pickup/Dropoff are never blocked.
bool is_blocked(Cell cell, Action a);

StepOutcome step(const TaxiState& s, Action a, const EnvConfig& cfg);

/// The 300 legal episode starts (passenger waiting at a landmark other than
/// the destination), in ascending index order.
const std::vector<TaxiState>& start_states();
bool is_start_state(const TaxiState& s);

TaxiState reset(std::mt19937_64& rng);
TaxiState reset(std::uint64_t seed);

using FeatureVector = std::vector<double>;

FeatureVector extract_features(const TaxiState& s, const EnvConfig& cfg);
/// Writes the features into `out`, which must hold exactly cfg.feature_dim() entries.
void extract_features_into(const TaxiState& s, const EnvConfig& cfg, std::span<double> out);
std::vector<std::string> feature_names(const EnvConfig& cfg);

/// Row-major table of features for every encoded state: entry [i * dim + j].
std::vector<double> feature_table(const EnvConfig& cfg);

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State potential indexed by encoded state.
using StatePotential = std::function<double(int)>;

struct ValueIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

struct ValueIterationResult {
  std::vector<double> values;                          // per encoded state
  std::vector<std::array<double, kNumActions>> q;      // per encoded state
  std::vector<int> policy;                             // greedy, lowest-index tie-break
  int iterations = 0;
};

/// Exact Bellman fixed point over all 500 states. With a potential, rewards are
/// shaped as r + gamma * phi(s') * (1 - terminal) - phi(s).
ValueIterationResult value_iteration(const EnvConfig& cfg, double gamma,
                                     const StatePotential& potential = {},
                                     ValueIterationOptions options = {});

/// CSV dump of every (state, action) transition:
/// state_index,action,next_index,reward,terminal
void dump_transitions(std::ostream& out, const EnvConfig& cfg);

}  // namespace vrail::taxi
