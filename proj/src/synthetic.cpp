#include "provmind/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace provmind {

using nlohmann::json;

SyntheticParams SyntheticParams::from_json(const json& j) {
  SyntheticParams p;
  p.n_records = j.value("n_records", p.n_records);
  p.activity_vocab = j.value("activity_vocab", p.activity_vocab);
  p.tool_vocab = j.value("tool_vocab", p.tool_vocab);
  p.condition_vocab = j.value("condition_vocab", p.condition_vocab);
  if (j.contains("route_length_range")) {
    p.route_length_range = {j["route_length_range"].at(0).get<int>(), j["route_length_range"].at(1).get<int>()};
  }
  if (j.contains("year_range")) {
    p.year_range = {j["year_range"].at(0).get<int>(), j["year_range"].at(1).get<int>()};
  }
  if (j.contains("class_mix")) {
    p.class_mix.clear();
    for (auto it = j["class_mix"].begin(); it != j["class_mix"].end(); ++it) {
      p.class_mix[material_class_from_string(it.key())] = it.value().get<double>();
    }
  }
  p.regularity = j.value("regularity", p.regularity);
  p.branch_probability = j.value("branch_probability", p.branch_probability);
  p.shuffle_source_probability = j.value("shuffle_source_probability", p.shuffle_source_probability);
  p.unconnected_probability = j.value("unconnected_probability", p.unconnected_probability);
  p.max_records_per_doi = j.value("max_records_per_doi", p.max_records_per_doi);
  return p;
}

json SyntheticParams::to_json() const {
  json mix = json::object();
  for (const auto& [c, w] : class_mix) mix[std::string(to_string(c))] = w;
  return json{{"n_records", n_records},
              {"activity_vocab", activity_vocab},
              {"tool_vocab", tool_vocab},
              {"condition_vocab", condition_vocab},
              {"route_length_range", {route_length_range.first, route_length_range.second}},
              {"class_mix", mix},
              {"year_range", {year_range.first, year_range.second}},
              {"regularity", regularity},
              {"branch_probability", branch_probability},
              {"shuffle_source_probability", shuffle_source_probability},
              {"unconnected_probability", unconnected_probability},
              {"max_records_per_doi", max_records_per_doi}};
}

namespace {

const std::map<MaterialClass, std::vector<std::string>>& precursor_vocab() {
  static const std::map<MaterialClass, std::vector<std::string>> vocab{
      {MaterialClass::battery, {"Li2CO3", "LiOH·H2O", "Co3O4", "NiO", "MnO2", "FePO4", "NH4H2PO4", "Na2CO3"}},
      {MaterialClass::thermoelectric, {"Bi", "Te", "Sb", "Se", "Pb", "Sn", "Ag2Se", "Cu"}},
      {MaterialClass::magnetic, {"Fe2O3", "Nd", "Co", "BaCO3", "SrCO3", "Fe(NO3)3·9H2O", "Mn", "Ni"}},
      {MaterialClass::other, {"TiO2", "ZrO2", "SiO2", "Al2O3", "ZnO", "citric acid"}},
  };
  return vocab;
}

const std::map<MaterialClass, std::vector<std::string>>& product_vocab() {
  static const std::map<MaterialClass, std::vector<std::string>> vocab{
      {MaterialClass::battery, {"LiCoO2", "LiNi0.8Mn0.1Co0.1O2", "LiFePO4", "LiMn2O4", "Na3V2(PO4)3"}},
      {MaterialClass::thermoelectric, {"Bi2Te3", "PbTe", "SnSe", "Bi0.5Sb1.5Te3", "Cu2Se"}},
      {MaterialClass::magnetic, {"Nd2Fe14B", "BaFe12O19", "SrFe12O19", "CoFe2O4", "MnBi"}},
      {MaterialClass::other, {"BaTiO3", "ZnO nanorods", "YSZ", "TiO2 film"}},
  };
  return vocab;
}

const std::vector<std::string>& form_vocab() {
  static const std::vector<std::string> forms{"powder", "pellet", "slurry", "solution", "ingot", "film", "gel"};
  return forms;
}

/// Activity-level preferences drawn once per corpus.
struct Regularities {
  std::vector<std::vector<std::size_t>> successors;  // preferred next activities
  std::map<MaterialClass, std::vector<std::size_t>> starts;
  std::vector<std::vector<std::string>> condition_keys;
  std::vector<std::map<std::string, std::string>> preferred_values;
  std::vector<std::size_t> preferred_tool;
  std::vector<std::string> output_form;
};

constexpr double kSuccessorWeights[] = {0.6, 0.25, 0.15};

Regularities draw_regularities(const SyntheticParams& p, Rng& rng) {
  const std::size_t n = p.activity_vocab.size();
  Regularities r;
  r.successors.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> others;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a || n == 1) others.push_back(b);
    }
    rng.shuffle(others);
    others.resize(std::min<std::size_t>(3, others.size()));
    r.successors[a] = others;
  }
  for (const auto& [cls, weight] : p.class_mix) {
    (void)weight;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    all.resize(std::min<std::size_t>(2, n));
    r.starts[cls] = all;
  }
  std::vector<std::string> keys;
  for (const auto& [k, values] : p.condition_vocab) {
    if (!values.empty()) keys.push_back(k);
  }
  const std::vector<std::string> thermal{"temperature", "duration", "atmosphere"};
  const bool has_thermal = std::all_of(thermal.begin(), thermal.end(), [&](const std::string& k) {
    return std::find(keys.begin(), keys.end(), k) != keys.end();
  });
  r.condition_keys.resize(n);
  r.preferred_values.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::string> chosen;
    if (has_thermal && rng.bernoulli(0.5)) {
      chosen = thermal;
    } else if (!keys.empty()) {
      auto pool = keys;
      rng.shuffle(pool);
      pool.resize(std::min<std::size_t>(1 + rng.index(2), pool.size()));
      chosen = pool;
    }
    std::sort(chosen.begin(), chosen.end());
    for (const auto& k : chosen) {
      const auto& values = p.condition_vocab.at(k);
      r.preferred_values[a][k] = values[rng.index(values.size())];
    }
    r.condition_keys[a] = chosen;
  }
  r.preferred_tool.resize(n);
  r.output_form.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    r.preferred_tool[a] = rng.index(p.tool_vocab.size());
    r.output_form[a] = form_vocab()[rng.index(form_vocab().size())];
  }
  return r;
}

void validate(const SyntheticParams& p) {
  if (p.activity_vocab.empty()) throw Error(ErrorCode::invalid_params, "activity_vocab is empty");
  if (p.tool_vocab.empty()) throw Error(ErrorCode::invalid_params, "tool_vocab is empty");
  if (p.condition_vocab.empty()) throw Error(ErrorCode::invalid_params, "condition_vocab is empty");
  for (const auto& [k, v] : p.condition_vocab) {
    if (v.empty()) throw Error(ErrorCode::invalid_params, "condition_vocab[" + k + "] is empty");
  }
  if (p.route_length_range.first < 1 || p.route_length_range.second < p.route_length_range.first) {
    throw Error(ErrorCode::invalid_params, "route_length_range must satisfy 1 <= lo <= hi");
  }
  if (p.year_range.second < p.year_range.first) throw Error(ErrorCode::invalid_params, "year_range reversed");
  double total = 0.0;
  for (const auto& [c, w] : p.class_mix) {
    if (w < 0.0) throw Error(ErrorCode::invalid_params, "negative class_mix weight");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::invalid_params, "class_mix is empty");
  if (p.max_records_per_doi < 1) throw Error(ErrorCode::invalid_params, "max_records_per_doi must be >= 1");
}

std::string padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

/// Largest-remainder quotas of n records over the class mix.
std::map<MaterialClass, std::size_t> class_quotas(const SyntheticParams& p) {
  double total = 0.0;
  for (const auto& [c, w] : p.class_mix) total += w;
  std::map<MaterialClass, std::size_t> quota;
  std::vector<std::pair<double, MaterialClass>> remainders;
  std::size_t assigned = 0;
  for (const auto& [c, w] : p.class_mix) {
    const double exact = static_cast<double>(p.n_records) * w / total;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < p.n_records; ++i, ++assigned) ++quota[remainders[i % remainders.size()].second];
  return quota;
}

struct GraphBuilder {
  ProcessGraph g;
  std::size_t material_counter = 0;
  std::size_t tool_counter = 0;
  std::map<std::string, std::string> tool_ids;

  std::string add_material(std::string label, AttributeMap attributes) {
    EntityNode e;
    e.id = "m" + std::to_string(++material_counter);
    e.label = std::move(label);
    e.kind = EntityKind::material;
    e.attributes = std::move(attributes);
    g.material_entities.push_back(e);
    return e.id;
  }

  std::string tool(const std::string& label) {
    auto it = tool_ids.find(label);
    if (it != tool_ids.end()) return it->second;
    EntityNode e;
    e.id = "t" + std::to_string(++tool_counter);
    e.label = label;
    e.kind = EntityKind::tool;
    e.role = Role::tool;
    g.tool_entities.push_back(e);
    tool_ids[label] = e.id;
    return e.id;
  }
};

}  // namespace

std::vector<ProcessGraph> generate_synthetic_corpus(const SyntheticParams& params, std::uint64_t seed) {
  validate(params);
  std::vector<ProcessGraph> corpus;
  if (params.n_records == 0) return corpus;

  Rng structure_rng(derive_seed(seed, std::string_view("structure")));
  const Regularities reg = draw_regularities(params, structure_rng);
  Rng rng(derive_seed(seed, std::string_view("records")));

  // DOI groups, then classes by quota and years per DOI.
  std::vector<std::size_t> group_sizes;
  for (std::size_t remaining = params.n_records; remaining > 0;) {
    const std::size_t size = std::min(remaining, 1 + rng.index(params.max_records_per_doi));
    group_sizes.push_back(size);
    remaining -= size;
  }
  auto quota = class_quotas(params);
  std::vector<std::size_t> doi_order(group_sizes.size());
  std::iota(doi_order.begin(), doi_order.end(), 0);
  rng.shuffle(doi_order);
  std::vector<MaterialClass> doi_class(group_sizes.size(), MaterialClass::other);
  std::map<MaterialClass, long long> deficit;
  for (const auto& [c, q] : quota) deficit[c] = static_cast<long long>(q);
  for (std::size_t d : doi_order) {
    auto best = deficit.begin();
    for (auto it = deficit.begin(); it != deficit.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    doi_class[d] = best->first;
    best->second -= static_cast<long long>(group_sizes[d]);
  }
  const int year_span = params.year_range.second - params.year_range.first + 1;
  std::vector<int> doi_year(group_sizes.size());
  for (auto& y : doi_year) y = params.year_range.first + static_cast<int>(rng.index(static_cast<std::size_t>(year_span)));

  const double r = std::clamp(params.regularity, 0.0, 1.0);
  const std::size_t n_acts = params.activity_vocab.size();
  auto pick_successor = [&](std::size_t current) {
    if (rng.bernoulli(r)) {
      const auto& pref = reg.successors[current];
      std::vector<double> w(kSuccessorWeights, kSuccessorWeights + pref.size());
      return pref[rng.weighted(w)];
    }
    return rng.index(n_acts);
  };

  std::size_t record_index = 0;
  for (std::size_t d = 0; d < group_sizes.size(); ++d) {
    const MaterialClass cls = doi_class[d];
    const auto& precursors = precursor_vocab().at(cls);
    const auto& products = product_vocab().at(cls);
    for (std::size_t k = 0; k < group_sizes[d]; ++k, ++record_index) {
      GraphBuilder b;
      b.g.record_id = "synth-" + padded(record_index, 5);
      b.g.doi = "10.5555/synth." + padded(d, 5);
      b.g.year = doi_year[d];
      b.g.material_class = cls;

      const int length = params.route_length_range.first +
                         static_cast<int>(rng.index(static_cast<std::size_t>(
                             params.route_length_range.second - params.route_length_range.first + 1)));
      std::vector<std::size_t> route;
      const auto& starts = reg.starts.at(cls);
      route.push_back(rng.bernoulli(r) ? starts[rng.index(starts.size())] : rng.index(n_acts));
      while (static_cast<int>(route.size()) < length) route.push_back(pick_successor(route.back()));

      auto fresh_precursor = [&]() {
        return b.add_material(precursors[rng.index(precursors.size())], {{"form", "powder"}, {"purity", "99.9%"}});
      };

      std::vector<std::string> pending;  // outputs waiting to be consumed
      bool previous_branched = false;
      for (std::size_t j = 0; j < route.size(); ++j) {
        const std::size_t act = route[j];
        ActivityNode a;
        a.id = "a" + std::to_string(j + 1);
        a.label = canonical_label(params.activity_vocab[act]);
        a.source_position = static_cast<int>(j);
        for (const auto& key : reg.condition_keys[act]) {
          if (!rng.bernoulli(0.85)) continue;
          const auto& values = params.condition_vocab.at(key);
          const std::string& v = rng.bernoulli(r) ? reg.preferred_values[act].at(key) : values[rng.index(values.size())];
          a.conditions[key] = canonical_value(v);
        }

        std::vector<std::string> inputs;
        const bool interior = j >= 1 && j + 1 < route.size();
        const bool branch = interior && !previous_branched && rng.bernoulli(params.branch_probability);
        if (j == 0) {
          const std::size_t n_pre = 1 + rng.index(3);
          for (std::size_t i = 0; i < n_pre; ++i) inputs.push_back(fresh_precursor());
        } else if (branch) {
          inputs.push_back(fresh_precursor());
        } else {
          inputs = pending;
          pending.clear();
          if (rng.bernoulli(0.15)) inputs.push_back(fresh_precursor());
        }
        previous_branched = branch;
        for (const auto& in : inputs) b.g.usage_edges.push_back({in, a.id});

        if (rng.bernoulli(0.8)) {
          const std::size_t t = rng.bernoulli(r) ? reg.preferred_tool[act] : rng.index(params.tool_vocab.size());
          b.g.usage_edges.push_back({b.tool(canonical_label(params.tool_vocab[t])), a.id});
        }

        const bool last = j + 1 == route.size();
        const std::string form = reg.output_form[act];
        const std::string out_label =
            last ? products[rng.index(products.size())] : form + " after " + a.label;
        const std::string out = b.add_material(out_label, {{"form", last ? std::string("powder") : form}});
        b.g.generation_edges.push_back({a.id, out});
        pending.push_back(out);
        b.g.activities.push_back(std::move(a));
      }
      if (rng.bernoulli(params.unconnected_probability)) {
        b.add_material(precursors[rng.index(precursors.size())], {{"form", "powder"}});
      }
      if (rng.bernoulli(params.shuffle_source_probability)) {
        std::vector<int> positions(b.g.activities.size());
        std::iota(positions.begin(), positions.end(), 0);
        rng.shuffle(positions);
        for (std::size_t i = 0; i < positions.size(); ++i) b.g.activities[i].source_position = positions[i];
        // keep document order, as a parser would see it
        std::sort(b.g.activities.begin(), b.g.activities.end(),
                  [](const ActivityNode& x, const ActivityNode& y) { return x.source_position < y.source_position; });
      }

      ProcessGraph g = assign_roles(std::move(b.g));
      g.ordered_activity_ids = order_activities(g, infer_precedence(g));
      corpus.push_back(std::move(g));
    }
  }
  return corpus;
}

}  // namespace provmind
