#include <algorithm>
#include <cmath>
#include <cstdint>

#include "joinaug/error.hpp"
#include "joinaug/selection.hpp"

namespace joinaug {

namespace {

// Minimax probe table for locating the maximum of a unimodal sequence. The
// state is a scored point x with `l` unscored candidates to its left and `r`
// to its right, both flanked by lower scored points. cost(l, r) is the worst
// case number of further probes needed to pin the argmax.
constexpr std::size_t kTableCap = 128;

struct Probe {
  bool right = true;
  std::size_t dist = 1;
};

class ProbeTable {
 public:
  ProbeTable() : cost_((kTableCap + 1) * (kTableCap + 1)), probe_((kTableCap + 1) * (kTableCap + 1)) {
    for (std::size_t total = 1; total <= 2 * kTableCap; ++total) {
      for (std::size_t l = total > kTableCap ? total - kTableCap : 0; l <= std::min(total, kTableCap); ++l) {
        std::size_t r = total - l;
        std::size_t best = SIZE_MAX;
        Probe choice;
        for (std::size_t j = 1; j <= r; ++j) {
          std::size_t w = 1 + std::max(at(j - 1, r - j), at(l, j - 1));
          if (w < best) best = w, choice = {true, j};
        }
        for (std::size_t j = 1; j <= l; ++j) {
          std::size_t w = 1 + std::max(at(l - j, j - 1), at(j - 1, r));
          if (w < best) best = w, choice = {false, j};
        }
        cost_[index(l, r)] = best;
        probe_[index(l, r)] = choice;
      }
    }
  }

  Probe probe(std::size_t l, std::size_t r) const { return probe_[index(l, r)]; }

 private:
  static std::size_t index(std::size_t l, std::size_t r) { return l * (kTableCap + 1) + r; }
  std::size_t at(std::size_t l, std::size_t r) const { return cost_[index(l, r)]; }

  std::vector<std::size_t> cost_;
  std::vector<Probe> probe_;
};

const ProbeTable& probe_table() {
  static const ProbeTable table;
  return table;
}

Probe choose_probe(std::size_t l, std::size_t r) {
  if (l <= kTableCap && r <= kTableCap) return probe_table().probe(l, r);
  // Golden-section point on the wider side.
  const bool right = r >= l;
  const std::size_t side = right ? r : l;
  auto dist = static_cast<std::size_t>(std::lround(0.381966 * static_cast<double>(side)));
  return {right, std::clamp<std::size_t>(dist, 1, side)};
}

}  // namespace

SearchResult exponential_search(std::size_t d, const std::function<double(std::size_t)>& prefix_score) {
  if (d < 1) throw Error(ErrorKind::no_features, "exponential search needs at least one feature");
  SearchResult out;
  auto eval = [&](std::size_t m) {
    auto it = out.scores.find(m);
    if (it != out.scores.end()) return it->second;
    double s = prefix_score(m);
    out.scores.emplace(m, s);
    ++out.evaluations;
    return s;
  };

  std::vector<std::size_t> steps;
  bool dropped = false;
  for (std::size_t m = std::min<std::size_t>(2, d);; m *= 2) {
    std::size_t mm = std::min(m, d);
    steps.push_back(mm);
    eval(mm);
    if (steps.size() >= 2 && out.scores[mm] < out.scores[steps[steps.size() - 2]]) {
      dropped = true;
      break;
    }
    if (mm == d) break;
  }

  // Bracket: scored point x, candidates strictly between lo and hi.
  // Prefixes shorter than the first doubling step are never candidates.
  const std::size_t floor = steps.front() - 1;
  std::size_t x = steps.back(), lo = floor, hi = d + 1;
  if (dropped) {
    const std::size_t i = steps.size() - 1;
    x = steps[i - 1];
    hi = steps[i];
    lo = i >= 2 ? steps[i - 2] : floor;
  } else if (steps.size() >= 2) {
    lo = steps[steps.size() - 2];
  }
  std::size_t l = x - lo - 1, r = hi - x - 1;
  double sx = out.scores[x];
  while (l + r > 0) {
    Probe p = choose_probe(l, r);
    if (p.right) {
      std::size_t y = x + p.dist;
      double sy = eval(y);
      if (sy > sx) {
        x = y, sx = sy, l = p.dist - 1, r -= p.dist;
      } else {
        r = p.dist - 1;
      }
    } else {
      std::size_t y = x - p.dist;
      double sy = eval(y);
      if (sy >= sx) {  // ties favour the shorter prefix
        x = y, sx = sy, r = p.dist - 1, l -= p.dist;
      } else {
        l = p.dist - 1;
      }
    }
  }
  out.m = x;
  return out;
}

SearchResult exponential_search(const RankingVector& ranking, const SubsetScorer& scorer) {
  const std::vector<std::size_t> order = ranking.order();
  SearchResult out = exponential_search(order.size(), [&](std::size_t m) {
    return scorer(std::span<const std::size_t>(order.data(), m));
  });
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.m));
  return out;
}

}  // namespace joinaug
