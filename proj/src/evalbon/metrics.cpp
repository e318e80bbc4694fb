#include <cmath>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/evalbon/evalbon.hpp"

namespace cyclepref::evalbon {

double pairwise_accuracy(const std::map<std::string, double>& predicted, const std::map<std::string, double>& reference) {
  if (reference.size() < 2) throw UndefinedMetric("pairwise accuracy needs at least 2 items");
  if (predicted.size() != reference.size()) throw InvalidInput("predicted and reference item sets differ");
  std::vector<std::pair<double, double>> rows;
  rows.reserve(reference.size());
  for (const auto& [item, ref] : reference) {
    auto it = predicted.find(item);
    if (it == predicted.end()) throw InvalidInput("item '" + item + "' has no predicted score");
    rows.emplace_back(it->second, ref);
  }
  double credit = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double dr = rows[i].second - rows[j].second;
      if (dr == 0.0) continue;
      const double dp = rows[i].first - rows[j].first;
      ++counted;
      if (dp == 0.0) {
        credit += 0.5;
      } else if ((dp > 0.0) == (dr > 0.0)) {
        credit += 1.0;
      }
    }
  }
  if (counted == 0) throw UndefinedMetric("all reference scores are tied");
  return credit / static_cast<double>(counted);
}

double agreement_rate(const Verifier& v, const std::vector<LabeledPair>& pairs, std::size_t parallelism) {
  if (pairs.empty()) throw InvalidInput("agreement rate needs at least one labeled pair");
  std::vector<double> credit(pairs.size());
  mappings::parallel_for(pairs.size(), parallelism, [&](std::size_t i) {
    const auto& p = pairs[i];
    const double sa = v.score(p.condition, p.a);
    const double sb = v.score(p.condition, p.b);
    if (sa == sb) {
      credit[i] = 0.5;
    } else {
      credit[i] = (sa > sb) == (p.choice == Choice::a) ? 1.0 : 0.0;
    }
  });
  double total = 0.0;
  for (double c : credit) total += c;
  return total / static_cast<double>(pairs.size());
}

TrendReport trend_report(const std::vector<TrendPoint>& points) {
  if (points.size() < 3) throw UndefinedMetric("trend report needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.factor;
    my += p.score;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = p.factor - mx;
    const double dy = p.score - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedMetric("correlation undefined: zero variance");
  const double slope = sxy / sxx;
  return TrendReport{sxy / std::sqrt(sxx * syy), slope, my - slope * mx, points};
}

TrendReport trend_report(const Verifier& v, const std::vector<TrendItem>& items, std::size_t parallelism) {
  std::vector<TrendPoint> points(items.size());
  mappings::parallel_for(items.size(), parallelism, [&](std::size_t i) {
    points[i] = {items[i].factor, v.score(items[i].condition, items[i].candidate)};
  });
  return trend_report(points);
}

}  // namespace cyclepref::evalbon
