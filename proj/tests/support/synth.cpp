#include "synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

#include "joinaug/random.hpp"

namespace joinaug::testing {

namespace {

FeatureMatrix normal_matrix(std::size_t n, std::size_t d, Rng& rng, const std::string& prefix) {
  std::normal_distribution<double> g;
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < m.values.cols(); ++j)
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) m.values(i, j) = g(rng);
  for (std::size_t j = 0; j < d; ++j) {
    m.names.push_back(prefix + std::to_string(j));
    m.provenance.push_back("base");
  }
  return m;
}

LabelVector regression_labels(Eigen::VectorXd v) {
  LabelVector y;
  y.values = std::move(v);
  y.task = Task::regression;
  return y;
}

std::vector<std::string> key_values(const std::string& prefix, std::size_t domain) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < domain; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Table keyed_table(const std::string& name, const std::string& key, const std::vector<std::string>& domain,
                  std::size_t payload, const std::string& prefix, Rng& rng) {
  std::normal_distribution<double> g;
  Table t(name);
  t.add_column(Column::categorical(key, domain));
  for (std::size_t c = 0; c < payload; ++c) {
    std::vector<double> v(domain.size());
    for (auto& x : v) x = g(rng);
    t.add_column(Column::numeric(prefix + std::to_string(c + 1), std::move(v)));
  }
  return t;
}

}  // namespace

NoiseBenchmark make_noise_benchmark(std::size_t n, std::size_t signal, std::size_t noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xbe9c});
  NoiseBenchmark b;
  b.x = normal_matrix(n, signal + noise, rng, "x");
  for (std::size_t j = 0; j < signal; ++j) b.x.names[j] = "signal" + std::to_string(j);
  for (std::size_t j = signal; j < signal + noise; ++j) b.x.names[j] = "noise" + std::to_string(j - signal);
  std::normal_distribution<double> g;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < signal; ++j) y += b.x.values.col(static_cast<Eigen::Index>(j));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.1 * g(rng);
  b.y = regression_labels(std::move(y));
  b.signal = signal;
  return b;
}

NoiseBenchmark make_pure_noise(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x9015e});
  NoiseBenchmark b;
  b.x = normal_matrix(n, d, rng, "x");
  std::normal_distribution<double> g;
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = g(rng);
  b.y = regression_labels(std::move(y));
  return b;
}

SynthRepo write_synthetic_repo(const std::filesystem::path& dir, std::uint64_t seed, const SynthRepoOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "tables");
  Rng rng = make_rng(seed, {0x5e90});
  std::normal_distribution<double> g;

  const auto keys = key_values("k", opts.key_domain);
  const auto zones = key_values("z", opts.zone_domain);
  const auto days = key_values("d", opts.day_domain);

  Table relevant = keyed_table("relevant", "k", keys, 3, "f", rng);

  // Every key value appears at least once so the relevant table covers the base.
  std::vector<std::size_t> key_of(opts.rows), zone_of(opts.rows), day_of(opts.rows);
  std::uniform_int_distribution<std::size_t> pick_k(0, keys.size() - 1), pick_z(0, zones.size() - 1),
      pick_d(0, days.size() - 1);
  for (std::size_t i = 0; i < opts.rows; ++i) {
    key_of[i] = i < keys.size() ? i : pick_k(rng);
    zone_of[i] = pick_z(rng);
    day_of[i] = pick_d(rng);
  }
  std::shuffle(key_of.begin(), key_of.end(), rng);

  std::vector<std::string> kcol, zcol, dcol;
  std::vector<double> b1(opts.rows), b2(opts.rows), y(opts.rows);
  for (std::size_t i = 0; i < opts.rows; ++i) {
    kcol.push_back(keys[key_of[i]]);
    zcol.push_back(zones[zone_of[i]]);
    dcol.push_back(days[day_of[i]]);
    b1[i] = g(rng);
    b2[i] = g(rng);
    double f = 0.0;
    for (std::size_t c = 1; c <= 3; ++c) f += relevant.column(c).numbers[key_of[i]];
    y[i] = b1[i] + b2[i] + f + opts.noise_sd * g(rng);
  }
  Table base("base");
  base.add_column(Column::categorical("k", kcol));
  base.add_column(Column::categorical("zone", zcol));
  base.add_column(Column::categorical("day", dcol));
  base.add_column(Column::numeric("b1", b1));
  base.add_column(Column::numeric("b2", b2));
  base.add_column(Column::numeric("y", y));
  write_csv(base, dir / "base.csv");
  write_csv(relevant, dir / "tables" / "relevant.csv");

  SynthRepo repo;
  repo.dir = dir;
  repo.relevant_id = "relevant";
  nlohmann::json manifest = nlohmann::json::array();
  manifest.push_back({{"id", "relevant"},
                      {"table_path", "tables/relevant.csv"},
                      {"key_pairs", {{{"base", "k"}, {"foreign", "k"}, {"kind", "hard"}}}}});

  struct Decoy {
    const char* key;
    const std::vector<std::string>* domain;
  };
  const Decoy decoys[] = {{"k", &keys}, {"k", &keys}, {"k", &keys}, {"zone", &zones}, {"zone", &zones},
                          {"zone", &zones}, {"day", &days}, {"day", &days}, {"day", &days}};
  for (std::size_t i = 0; i < std::size(decoys); ++i) {
    std::string id = "decoy" + std::to_string(i);
    Table t = keyed_table(id, decoys[i].key, *decoys[i].domain, 3, "n", rng);
    write_csv(t, dir / "tables" / (id + ".csv"));
    manifest.push_back({{"id", id},
                        {"table_path", "tables/" + id + ".csv"},
                        {"key_pairs", {{{"base", decoys[i].key}, {"foreign", decoys[i].key}, {"kind", "hard"}}}}});
    repo.noise_ids.push_back(id);
  }
  repo.manifest = dir / "manifest.json";
  std::ofstream(repo.manifest) << manifest.dump(2) << "\n";

  nlohmann::json cfg = {{"base_table", "base.csv"},
                        {"target", "y"},
                        {"task", "regression"},
                        {"manifest", "manifest.json"},
                        {"exclude_columns", {"k", "zone", "day"}},
                        {"coreset", {{"method", "uniform"}, {"size", opts.coreset_size}}},
                        {"join", {{"strategy", "budget"}}},
                        {"selector", {{"name", "rifs"}}},
                        {"seed", seed}};
  repo.config = dir / "config.json";
  std::ofstream(repo.config) << cfg.dump(2) << "\n";
  return repo;
}

}  // namespace joinaug::testing
