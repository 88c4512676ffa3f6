#pragma once

// Reference Taxi dynamics written from the ASCII map, independent of
// vrail::taxi::step. Used only to cross-check the environment.

#include <array>
#include <deque>
#include <string>
#include <vector>

namespace vrail::oracle {

struct OracleTransition {
  int next_index;
  int reward;
  bool terminal;
};

class TaxiRuleOracle {
 public:
  explicit TaxiRuleOracle(bool sparse = false) : sparse_(sparse) {}

  static int encode(int row, int col, int pass, int dest) { return ((row * 5 + col) * 5 + pass) * 4 + dest; }

  OracleTransition transition(int index, int action) const {
    const int dest = index % 4;
    const int pass = (index / 4) % 5;
    const int col = (index / 20) % 5;
    const int row = index / 100;
    int r = row, c = col, p = pass;
    int reward = sparse_ ? 0 : -1;
    bool done = false;
    const std::array<std::array<int, 2>, 4> locs{{{0, 0}, {0, 4}, {4, 0}, {4, 3}}};
    auto at = [&](int k) { return locs[k][0] == row && locs[k][1] == col; };
    switch (action) {
      case 0: r = std::min(row + 1, 4); break;
      case 1: r = std::max(row - 1, 0); break;
      case 2:
        if (kMap[1 + row][2 * col + 2] == ':') c = std::min(col + 1, 4);
        break;
      case 3:
        if (kMap[1 + row][2 * col] == ':') c = std::max(col - 1, 0);
        break;
      case 4:
        if (pass < 4 && at(pass)) {
          p = 4;
        } else {
          reward = -10;
        }
        break;
      case 5: {
        int landmark = -1;
        for (int k = 0; k < 4; ++k) {
          if (at(k)) landmark = k;
        }
        if (pass == 4 && landmark == dest) {
          p = dest;
          done = true;
          reward = 20;
        } else if (pass == 4 && landmark >= 0) {
          p = landmark;
        } else {
          reward = -10;
        }
        break;
      }
    }
    return {encode(r, c, p, dest), reward, done};
  }

  /// Fewest steps from `index` to a successful dropoff (breadth-first search).
  int shortest_solution(int index) const {
    std::vector<int> dist(500, -1);
    std::deque<int> frontier{index};
    dist[index] = 0;
    while (!frontier.empty()) {
      const int s = frontier.front();
      frontier.pop_front();
      for (int a = 0; a < 6; ++a) {
        const OracleTransition t = transition(s, a);
        if (t.terminal) return dist[s] + 1;
        if (dist[t.next_index] < 0) {
          dist[t.next_index] = dist[s] + 1;
          frontier.push_back(t.next_index);
        }
      }
    }
    return -1;
  }

 private:
  static constexpr std::array<const char*, 7> kMap = {
      "+---------+", "|R: | : :G|", "| : | : : |", "| : : : : |",
      "| | : | : |", "|Y| : |B: |", "+---------+"};
  bool sparse_;
};

}  // namespace vrail::oracle
