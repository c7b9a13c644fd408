#include "repfrechet/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace repfrechet {

const char* version_string() noexcept { return REPFRECHET_VERSION; }

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ParseError(path + ": " + what); }

const Json& member(const Json& node, const char* key, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  auto it = node.find(key);
  if (it == node.end()) fail(path, std::string("missing key \"") + key + "\"");
  return *it;
}

double number(const Json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  const double v = node.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

Index integer(const Json& node, const std::string& path) {
  if (!node.is_number_integer()) fail(path, "expected an integer");
  return node.get<Index>();
}

const Json& array(const Json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array");
  return node;
}

Eigen::VectorXd vector_of(const Json& node, const std::string& path) {
  array(node, path);
  Eigen::VectorXd v(static_cast<Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<Index>(i)] = number(node[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Eigen::MatrixXd matrix_of(const Json& node, const std::string& path) {
  array(node, path);
  const auto rows = static_cast<Index>(node.size());
  Index cols = -1;
  Eigen::MatrixXd m;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    const Eigen::VectorXd row = vector_of(node[i], row_path);
    if (cols < 0) {
      cols = row.size();
      m.resize(rows, cols);
    } else if (row.size() != cols) {
      fail(row_path, "ragged matrix row (expected " + std::to_string(cols) + " entries)");
    }
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  if (rows == 0) m.resize(0, 0);
  return m;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Wrap invariant failures with the observation's location.
template <typename F>
auto located(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

}  // namespace

MetricObject metric_object_from_json(const Json& node, ObjectKind kind, const std::string& path,
                                     Index grid_size, bool symmetrize) {
  if (!node.is_object() || node.size() != 1)
    fail(path, "expected an object with exactly one of vector, quantiles, samples, laplacian, composite, index");
  const auto& [key, value] = *node.items().begin();
  const std::string vpath = path + "." + key;
  if (key == "vector") return EuclideanVector(vector_of(value, vpath));
  if (key == "quantiles") return QuantileDistribution(vector_of(value, vpath));
  if (key == "samples") {
    const Eigen::VectorXd s = vector_of(value, vpath);
    if (s.size() == 0) fail(vpath, "empty sample list");
    return quantile_from_samples(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), grid_size);
  }
  if (key == "laplacian") {
    Eigen::MatrixXd m = matrix_of(value, vpath);
    if (m.rows() != m.cols()) fail(vpath, "Laplacian must be square");
    return GraphLaplacian(symmetrize ? repfrechet::symmetrize(m) : m);
  }
  if (key == "index") {
    const Index i = integer(value, vpath);
    if (i < 0) fail(vpath, "index must be nonnegative");
    return PrecomputedRef{i};
  }
  if (key == "composite") {
    const Json& parts = array(member(value, "parts", vpath), vpath + ".parts");
    CompositeObject c;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::string ppath = vpath + ".parts[" + std::to_string(p) + "]";
      if (parts[p].is_object() && (parts[p].contains("composite") || parts[p].contains("index")))
        fail(ppath, "composite parts must be vector, quantiles, samples or laplacian");
      c.parts.push_back(metric_object_from_json(parts[p], kind, ppath, grid_size, symmetrize));
    }
    if (c.parts.empty()) fail(vpath + ".parts", "composite needs at least one part");
    return MetricObject(std::move(c));
  }
  fail(path, "unknown observation type \"" + key + "\"");
}

Json metric_object_to_json(const MetricObject& object) {
  return std::visit(
      [](const auto& o) -> Json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, QuantileDistribution>) {
          return Json{{"quantiles", vector_json(o.values())}};
        } else if constexpr (std::is_same_v<T, GraphLaplacian>) {
          return Json{{"laplacian", matrix_json(o.matrix())}};
        } else if constexpr (std::is_same_v<T, EuclideanVector>) {
          return Json{{"vector", vector_json(o.coords())}};
        } else if constexpr (std::is_same_v<T, PrecomputedRef>) {
          return Json{{"index", o.index}};
        } else {
          Json parts = Json::array();
          for (const auto& p : o.parts) parts.push_back(metric_object_to_json(p));
          return Json{{"composite", Json{{"parts", parts}}}};
        }
      },
      object.storage());
}

Dataset dataset_from_json(const Json& doc, const LoadOptions& options) {
  const std::string root = "$";
  if (!doc.is_object()) fail(root, "expected an object");
  Dataset d;
  const Json& kind = member(doc, "kind", root);
  if (!kind.is_string()) fail(root + ".kind", "expected a string");
  try {
    d.kind = object_kind_from_string(kind.get<std::string>());
  } catch (const ParseError& e) {
    fail(root + ".kind", e.what());
  }
  Index grid = kDefaultGridSize;
  if (auto it = doc.find("grid_size"); it != doc.end() && !it->is_null()) {
    grid = integer(*it, root + ".grid_size");
    if (grid < 2) fail(root + ".grid_size", "grid_size must be at least 2");
    d.grid_size = grid;
  }
  if (auto it = doc.find("support"); it != doc.end() && !it->is_null()) {
    const Eigen::VectorXd s = vector_of(*it, root + ".support");
    if (s.size() != 2 || !(s[0] < s[1])) fail(root + ".support", "expected [lo, hi] with lo < hi");
    d.support = std::make_pair(s[0], s[1]);
  }
  if (auto it = doc.find("distances"); it != doc.end() && !it->is_null()) {
    Eigen::MatrixXd m = matrix_of(*it, root + ".distances");
    located(root + ".distances", [&] {
      Metric::validate_precomputed(m);
      return 0;
    });
    d.distances = std::make_shared<const Eigen::MatrixXd>(std::move(m));
  }
  if (d.kind == ObjectKind::precomputed && !d.distances) fail(root, "precomputed kind needs a \"distances\" matrix");

  const Json& groups = array(member(doc, "groups", root), root + ".groups");
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const std::string gpath = root + ".groups[" + std::to_string(j) + "]";
    const Json& gnode = groups[j];
    Group g;
    if (auto it = gnode.is_object() ? gnode.find("name") : gnode.end(); gnode.is_object() && it != gnode.end()) {
      if (!it->is_string()) fail(gpath + ".name", "expected a string");
      g.name = it->get<std::string>();
    }
    const std::string gname = g.name.empty() ? "group #" + std::to_string(j) : "group '" + g.name + "'";
    const Json& subjects = array(member(gnode, "subjects", gpath), gpath + ".subjects");
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      const std::string spath = gpath + ".subjects[" + std::to_string(i) + "]";
      Subject s;
      const Json& snode = subjects[i];
      if (snode.is_object()) {
        if (auto it = snode.find("id"); it != snode.end()) {
          if (it->is_string()) s.id = it->get<std::string>();
          else if (it->is_number_integer()) s.id = std::to_string(it->get<long long>());
          else fail(spath + ".id", "expected a string or integer");
        }
      }
      const std::string sname = s.id.empty() ? "subject #" + std::to_string(i) : "subject '" + s.id + "'";
      const Json& obs = array(member(snode, "observations", spath), spath + ".observations");
      for (std::size_t l = 0; l < obs.size(); ++l) {
        const std::string opath = spath + ".observations[" + std::to_string(l) + "]";
        const std::string where = gname + ", " + sname + ", observation " + std::to_string(l);
        s.observations.push_back(located(where, [&] {
          return metric_object_from_json(obs[l], d.kind, opath, grid, options.symmetrize);
        }));
      }
      g.subjects.push_back(std::move(s));
    }
    d.groups.push_back(std::move(g));
  }
  validate(d);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return dataset_from_json(doc, options);
}

Dataset load_vector_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      out.push_back(cell);
    }
    return out;
  };
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  const auto header = split(line);
  if (header.size() < 4 || header[0] != "group" || header[1] != "subject" || header[2] != "repeat")
    throw ParseError(path.string() + ": header must start with group,subject,repeat followed by coordinates");
  const std::size_t dim = header.size() - 3;

  struct Row {
    long long repeat;
    Eigen::VectorXd x;
  };
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<std::string>> subject_order;
  std::map<std::pair<std::string, std::string>, std::vector<Row>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " columns");
    Row r{};
    try {
      std::size_t used = 0;
      r.repeat = std::stoll(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("repeat");
      r.x.resize(static_cast<Index>(dim));
      for (std::size_t c = 0; c < dim; ++c) {
        r.x[static_cast<Index>(c)] = std::stod(cells[3 + c], &used);
        if (used != cells[3 + c].size() || !std::isfinite(r.x[static_cast<Index>(c)])) throw std::invalid_argument("x");
      }
    } catch (const std::exception&) {
      throw ParseError(where + ": malformed number");
    }
    const auto& gname = cells[0];
    const auto& sname = cells[1];
    if (!subject_order.count(gname)) group_order.push_back(gname);
    auto& subs = subject_order[gname];
    if (std::find(subs.begin(), subs.end(), sname) == subs.end()) subs.push_back(sname);
    rows[{gname, sname}].push_back(std::move(r));
  }
  Dataset d;
  d.kind = ObjectKind::vector;
  for (const auto& gname : group_order) {
    Group g{gname, {}};
    for (const auto& sname : subject_order[gname]) {
      auto& rs = rows[{gname, sname}];
      std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.repeat < b.repeat; });
      Subject s{sname, {}};
      for (auto& r : rs) s.observations.emplace_back(EuclideanVector(std::move(r.x)));
      g.subjects.push_back(std::move(s));
    }
    d.groups.push_back(std::move(g));
  }
  validate(d);
  return d;
}

Json dataset_to_json(const Dataset& dataset) {
  Json doc;
  doc["kind"] = to_string(dataset.kind);
  if (dataset.grid_size) doc["grid_size"] = *dataset.grid_size;
  if (dataset.support) doc["support"] = Json::array({dataset.support->first, dataset.support->second});
  if (dataset.distances) doc["distances"] = matrix_json(*dataset.distances);
  Json groups = Json::array();
  for (const auto& g : dataset.groups) {
    Json subjects = Json::array();
    for (const auto& s : g.subjects) {
      Json obs = Json::array();
      for (const auto& o : s.observations) obs.push_back(metric_object_to_json(o));
      subjects.push_back(Json{{"id", s.id}, {"observations", std::move(obs)}});
    }
    groups.push_back(Json{{"name", g.name}, {"subjects", std::move(subjects)}});
  }
  doc["groups"] = std::move(groups);
  return doc;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_text(path, dataset_to_json(dataset).dump(1) + "\n");
}

// ---------------------------------------------------------------------------

namespace {

Json variance_json(const VarianceEstimate& v) {
  return Json{{"value", v.value}, {"clamped", v.clamped}, {"degenerate", v.degenerate}};
}

VarianceEstimate variance_from(const Json& j) {
  return {j.at("value").get<double>(), j.at("clamped").get<bool>(), j.at("degenerate").get<bool>()};
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

Json header(const ReportContext& context) {
  Json doc;
  doc["tool"] = "repfrechet";
  doc["version"] = version_string();
  doc["command"] = context.command;
  doc["seed"] = context.seed;
  doc["config"] = context.config;
  return doc;
}

}  // namespace

Json test_result_to_json(const TestResult& r, const ReportContext& context) {
  Json doc = header(context);
  Json res;
  res["N"] = r.N;
  res["V_pooled"] = r.V_pooled;
  const auto& c = r.components;
  res["statistic"] = Json{{"D_n", c.D_n},
                          {"U_n", optional_json(c.U_n)},
                          {"R_n", optional_json(c.R_n)},
                          {"Q_n", c.Q_n},
                          {"mean_term", c.mean_term},
                          {"variance_term", c.variance_term},
                          {"within_term", c.within_term},
                          {"within", c.within}};
  res["calibration"] = Json{{"method", to_string(r.calibration.method)},
                            {"eigenvalues", r.calibration.eigenvalues},
                            {"matrix", matrix_json(r.calibration.matrix)}};
  res["p_value"] = r.p_value;
  res["alpha"] = r.alpha;
  res["critical_value"] = optional_json(r.critical_value);
  res["reject"] = r.reject;
  Json groups = Json::array();
  for (const auto& g : r.groups) {
    Json gj;
    gj["name"] = g.name;
    gj["subjects"] = g.subjects;
    gj["N"] = g.N;
    gj["lambda"] = g.lambda;
    gj["V_hat"] = g.V_hat;
    gj["rho_hat"] = optional_json(g.rho_hat);
    gj["sigma2"] = variance_json(g.sigma2);
    gj["gamma2"] = g.gamma2 ? variance_json(*g.gamma2) : Json(nullptr);
    gj["cross"] = optional_json(g.cross);
    gj["xi"] = g.xi ? Json{{"value", g.xi->value}, {"clamped", g.xi->clamped}} : Json(nullptr);
    gj["frechet_mean"] = metric_object_to_json(g.frechet_mean);
    groups.push_back(std::move(gj));
  }
  res["groups"] = std::move(groups);
  Json diags = Json::array();
  for (const auto& d : r.diagnostics) diags.push_back(Json{{"code", d.code}, {"message", d.message}});
  res["diagnostics"] = std::move(diags);
  doc["result"] = std::move(res);
  return doc;
}

TestResult test_result_from_json(const Json& doc) {
  const Json& res = doc.contains("result") ? doc.at("result") : doc;
  try {
    TestResult r;
    r.N = res.at("N").get<Index>();
    r.V_pooled = res.at("V_pooled").get<double>();
    const Json& st = res.at("statistic");
    r.components.D_n = st.at("D_n").get<double>();
    r.components.U_n = opt<double>(st, "U_n");
    r.components.R_n = opt<double>(st, "R_n");
    r.components.Q_n = st.at("Q_n").get<double>();
    r.components.mean_term = st.at("mean_term").get<double>();
    r.components.variance_term = st.at("variance_term").get<double>();
    r.components.within_term = st.at("within_term").get<double>();
    r.components.within = st.at("within").get<bool>();
    const Json& cal = res.at("calibration");
    r.calibration.method = cal.at("method").get<std::string>() == "monte_carlo" ? SfMethod::monte_carlo : SfMethod::quadrature;
    r.calibration.eigenvalues = cal.at("eigenvalues").get<std::vector<double>>();
    r.calibration.matrix = matrix_of(cal.at("matrix"), "$.result.calibration.matrix");
    r.p_value = res.at("p_value").get<double>();
    r.alpha = res.at("alpha").get<double>();
    r.critical_value = opt<double>(res, "critical_value");
    r.reject = res.at("reject").get<bool>();
    for (const auto& gj : res.at("groups")) {
      const Json& mean = gj.at("frechet_mean");
      const ObjectKind kind = ObjectKind::vector;
      GroupSummary g{
          .name = gj.at("name").get<std::string>(),
          .subjects = gj.at("subjects").get<Index>(),
          .N = gj.at("N").get<Index>(),
          .lambda = gj.at("lambda").get<double>(),
          .frechet_mean = metric_object_from_json(mean, kind, "$.result.groups[].frechet_mean"),
          .V_hat = gj.at("V_hat").get<double>(),
          .rho_hat = opt<double>(gj, "rho_hat"),
          .sigma2 = variance_from(gj.at("sigma2")),
          .gamma2 = gj.at("gamma2").is_null() ? std::nullopt : std::optional(variance_from(gj.at("gamma2"))),
          .cross = opt<double>(gj, "cross"),
          .xi = gj.at("xi").is_null()
                    ? std::nullopt
                    : std::optional(XiEstimate{gj.at("xi").at("value").get<double>(), gj.at("xi").at("clamped").get<bool>()}),
      };
      r.groups.push_back(std::move(g));
    }
    for (const auto& dj : res.at("diagnostics"))
      r.diagnostics.push_back({dj.at("code").get<std::string>(), dj.at("message").get<std::string>()});
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed test report: ") + e.what());
  }
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string test_result_csv(const TestResult& r) {
  std::ostringstream out;
  auto row = [&](const std::string& k, const std::string& v) { out << k << ',' << v << '\n'; };
  auto opt_row = [&](const std::string& k, const std::optional<double>& v) { row(k, v ? format_double(*v) : "NA"); };
  row("field", "value");
  row("N", std::to_string(r.N));
  row("V_pooled", format_double(r.V_pooled));
  row("D_n", format_double(r.components.D_n));
  opt_row("U_n", r.components.U_n);
  opt_row("R_n", r.components.R_n);
  row("Q_n", format_double(r.components.Q_n));
  row("p_value", format_double(r.p_value));
  row("alpha", format_double(r.alpha));
  opt_row("critical_value", r.critical_value);
  row("reject", r.reject ? "true" : "false");
  for (std::size_t i = 0; i < r.calibration.eigenvalues.size(); ++i)
    row("eigenvalue_" + std::to_string(i + 1), format_double(r.calibration.eigenvalues[i]));
  return out.str();
}

Json study_to_json(const StudyReport& report) {
  const auto& cfg = report.config;
  Json doc;
  doc["tool"] = "repfrechet";
  doc["version"] = version_string();
  doc["command"] = "simulate";
  doc["seed"] = cfg.seed;
  Json groups = Json::array();
  for (const auto& g : cfg.groups)
    groups.push_back(Json{{"n", g.n}, {"r", g.repeats.str()}, {"iota", g.iota}, {"beta", g.beta}, {"eps", g.eps}, {"tau", g.tau}});
  doc["config"] = Json{{"scenario", to_string(cfg.kind)},
                       {"groups", std::move(groups)},
                       {"nodes", cfg.nodes},
                       {"vector_dim", cfg.vector_dim},
                       {"grid_size", cfg.grid_size},
                       {"support", cfg.support},
                       {"alpha", cfg.alpha},
                       {"replicates", cfg.replicates},
                       {"param_name", cfg.param_name},
                       {"param_value", cfg.param_value}};
  Json methods = Json::array();
  for (const auto& m : report.methods)
    methods.push_back(Json{{"method", m.method}, {"rejections", m.rejections}, {"rate", m.rate}, {"se", m.se}, {"p_values", m.p_values}});
  doc["methods"] = std::move(methods);
  doc["redraws"] = report.redraws;
  doc["runtime_seconds"] = report.runtime_seconds;
  return doc;
}

std::string study_csv_header() { return "scenario,param_name,param_value,replicates,rejections,rate,se,seed\n"; }

std::string study_csv_rows(const StudyReport& report) {
  const auto& cfg = report.config;
  std::ostringstream out;
  for (const auto& m : report.methods) {
    std::string scenario = to_string(cfg.kind);
    if (report.methods.size() > 1) scenario += ":" + m.method;
    out << scenario << ',' << cfg.param_name << ',' << format_double(cfg.param_value) << ',' << cfg.replicates << ','
        << m.rejections << ',' << format_double(m.rate) << ',' << format_double(m.se) << ',' << cfg.seed << '\n';
  }
  return out.str();
}

Json baseline_to_json(const BaselineReport& report, const ReportContext& context) {
  Json doc = header(context);
  doc["result"] = Json{{"p_values", report.aggregate.p_values},
                       {"theta", report.aggregate.theta},
                       {"overall_p", report.aggregate.overall_p},
                       {"clipped", report.aggregate.clipped},
                       {"subjects_kept", report.subjects_kept}};
  return doc;
}

std::string baseline_csv(const BaselineReport& report) {
  std::ostringstream out;
  out << "replicate,p_value\n";
  for (std::size_t b = 0; b < report.aggregate.p_values.size(); ++b)
    out << b << ',' << format_double(report.aggregate.p_values[b]) << '\n';
  out << "theta," << format_double(report.aggregate.theta) << '\n';
  out << "overall_p," << format_double(report.aggregate.overall_p) << '\n';
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
  if (!out) throw ParseError("failed writing " + path.string());
}

}  // namespace repfrechet
