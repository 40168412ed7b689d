#pragma once

// File formats. Problems, solutions, and points are JSON documents; matrices
// travel as 1-based "row col value" coordinate text with %.17g values so
// every double round-trips exactly. Solution vectors are JSON number arrays
// (the serializer emits shortest-round-trip literals).

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"
#include "hadopt/problems.hpp"
#include "hadopt/solver.hpp"

namespace hadopt {

using Json = nlohmann::json;

inline Json vec_to_json(const VectorXd& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline VectorXd vec_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("expected a number array");
  VectorXd v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& e : j) {
    if (!e.is_number()) throw ParseError("expected a number array");
    v[i++] = e.get<double>();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Coordinate text blocks.

inline std::string coord_from_sparse(const SparseMat& a) {
  std::string out;
  char buf[80];
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SparseMat::InnerIterator it(a, j); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n",
                    static_cast<long long>(it.row() + 1),
                    static_cast<long long>(it.col() + 1), it.value());
      out += buf;
    }
  return out;
}

inline std::string coord_from_dense(const MatrixXd& a) {
  std::string out;
  char buf[80];
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != 0.0) {
        std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n", static_cast<long long>(i + 1),
                      static_cast<long long>(j + 1), a(i, j));
        out += buf;
      }
  return out;
}

inline std::string coord_from_handle(const MatrixHandle& a) {
  return a.stored_sparse() ? coord_from_sparse(a.sparse_ref())
                           : coord_from_dense(a.dense_ref());
}

inline std::vector<Eigen::Triplet<double>> coord_parse(const std::string& text, Index rows,
                                                       Index cols) {
  std::vector<Eigen::Triplet<double>> trip;
  std::istringstream in(text);
  std::string line;
  long long lineno = 0;
  char buf[160];
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long i = 0, j = 0;
    double v = 0.0;
    std::string rest;
    if (!(ls >> i >> j >> v) || (ls >> rest)) {
      std::snprintf(buf, sizeof(buf), "coordinate line %lld: expected 'i j value'", lineno);
      throw ParseError(buf);
    }
    if (i < 1 || i > rows || j < 1 || j > cols) {
      std::snprintf(buf, sizeof(buf), "coordinate line %lld: index (%lld, %lld) outside %lldx%lld",
                    lineno, i, j, static_cast<long long>(rows), static_cast<long long>(cols));
      throw ParseError(buf);
    }
    trip.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
  }
  return trip;
}

inline SparseMat sparse_from_coord(const std::string& text, Index rows, Index cols) {
  const auto trip = coord_parse(text, rows, cols);
  SparseMat a(rows, cols);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

inline MatrixXd dense_from_coord(const std::string& text, Index rows, Index cols) {
  MatrixXd a = MatrixXd::Zero(rows, cols);
  for (const auto& t : coord_parse(text, rows, cols)) a(t.row(), t.col()) = t.value();
  return a;
}

// ---------------------------------------------------------------------------
// Problems.

inline Json objective_to_json(const Objective& phi) {
  if (const auto* cqp = dynamic_cast<const ObjectiveCQP*>(&phi)) {
    Json j;
    j["kind"] = "cqp";
    j["storage"] = cqp->q().stored_sparse() ? "sparse" : "dense";
    j["n"] = cqp->q().rows();
    j["q_coord"] = coord_from_handle(cqp->q());
    j["c"] = vec_to_json(cqp->c());
    return j;
  }
  if (const auto* gw = dynamic_cast<const GwObjective*>(&phi)) {
    Json j;
    j["kind"] = "gw";
    j["source_n"] = gw->mr();
    j["target_n"] = gw->nc();
    j["source_coord"] = coord_from_dense(gw->da());
    j["target_coord"] = coord_from_dense(gw->db());
    j["mu"] = vec_to_json(gw->mu());
    j["nu"] = vec_to_json(gw->nu());
    return j;
  }
  if (const auto* bc = dynamic_cast<const GwbcObjective*>(&phi)) {
    Json j;
    j["kind"] = "gwbc";
    j["lambda"] = vec_to_json(bc->lam());
    j["mu"] = vec_to_json(bc->mu());
    Json pieces = Json::array();
    for (Index i = 0; i < bc->pieces(); ++i) {
      Json p;
      p["n"] = bc->piece_cols(i);
      p["c_coord"] = coord_from_dense(bc->cs()[static_cast<std::size_t>(i)]);
      p["nu"] = vec_to_json(bc->nus()[static_cast<std::size_t>(i)]);
      pieces.push_back(std::move(p));
    }
    j["pieces"] = std::move(pieces);
    return j;
  }
  throw Error("objective kind is not serializable");
}

inline std::shared_ptr<const Objective> objective_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cqp") {
    const Index n = j.at("n").get<Index>();
    VectorXd c = vec_from_json(j.at("c"));
    const std::string coord = j.at("q_coord").get<std::string>();
    if (j.at("storage").get<std::string>() == "sparse")
      return std::make_shared<ObjectiveCQP>(sparse_from_coord(coord, n, n), std::move(c));
    return std::make_shared<ObjectiveCQP>(dense_from_coord(coord, n, n), std::move(c));
  }
  if (kind == "gw") {
    const Index mr = j.at("source_n").get<Index>();
    const Index nc = j.at("target_n").get<Index>();
    return std::make_shared<GwObjective>(
        dense_from_coord(j.at("source_coord").get<std::string>(), mr, mr),
        dense_from_coord(j.at("target_coord").get<std::string>(), nc, nc),
        vec_from_json(j.at("mu")), vec_from_json(j.at("nu")));
  }
  if (kind == "gwbc") {
    std::vector<MatrixXd> cs;
    std::vector<VectorXd> nus;
    for (const auto& p : j.at("pieces")) {
      const Index n = p.at("n").get<Index>();
      cs.push_back(dense_from_coord(p.at("c_coord").get<std::string>(), n, n));
      nus.push_back(vec_from_json(p.at("nu")));
    }
    return std::make_shared<GwbcObjective>(std::move(cs), std::move(nus),
                                           vec_from_json(j.at("lambda")),
                                           vec_from_json(j.at("mu")));
  }
  throw ParseError("unknown objective kind: " + kind);
}

inline Json problem_to_json(const ProblemLCP& prob) {
  Json j;
  j["format"] = "hadopt-problem";
  j["version"] = 1;
  j["name"] = prob.name();
  j["m"] = prob.m();
  j["n"] = prob.n();
  Json a;
  a["rows"] = prob.m();
  a["cols"] = prob.n();
  a["storage"] = prob.a().stored_sparse() ? "sparse" : "dense";
  a["coord"] = coord_from_handle(prob.a());
  j["A"] = std::move(a);
  j["b"] = vec_to_json(prob.b());
  j["objective"] = objective_to_json(prob.phi());
  return j;
}

inline ProblemLCP problem_from_json(const Json& j) {
  if (j.value("format", "") != std::string("hadopt-problem"))
    throw ParseError("not a problem file");
  if (j.value("version", 0) != 1) throw ParseError("unsupported problem version");
  const auto& ja = j.at("A");
  const Index m = ja.at("rows").get<Index>();
  const Index n = ja.at("cols").get<Index>();
  const std::string coord = ja.at("coord").get<std::string>();
  MatrixHandle a = ja.at("storage").get<std::string>() == "sparse"
                       ? MatrixHandle(sparse_from_coord(coord, m, n))
                       : MatrixHandle(dense_from_coord(coord, m, n));
  return ProblemLCP(std::move(a), vec_from_json(j.at("b")),
                    objective_from_json(j.at("objective")),
                    j.value("name", std::string("unnamed")));
}

// ---------------------------------------------------------------------------
// Solutions and points.

inline Json report_to_json(const SolverReport& r) {
  Json j;
  j["status"] = to_string(r.status);
  j["obj"] = r.obj;
  j["iters"] = r.iters;
  j["ldl_count"] = r.ldl_count;
  j["pg_count"] = r.pg_count;
  j["time_sec"] = r.time_sec;
  j["multiplier_source"] = std::string(1, r.multiplier_source);
  j["sigma_regular"] = r.sigma_regular;
  j["rank"] = r.rank;
  Json kk;
  kk["primal"] = r.kkt.primal;
  kk["dual"] = r.kkt.dual;
  kk["compl"] = r.kkt.comp;
  kk["max"] = r.kkt.max;
  j["kkt"] = std::move(kk);
  return j;
}

inline Json trace_to_json(const std::vector<IterRecord>& trace) {
  Json arr = Json::array();
  for (const auto& r : trace) {
    Json j;
    j["k"] = r.k;
    j["kind"] = std::string(1, r.kind);
    j["t"] = r.t;
    j["obj"] = r.obj;
    if (std::isfinite(r.grad_norm)) j["grad_norm"] = r.grad_norm;
    if (std::isfinite(r.h)) j["h"] = r.h;
    if (std::isfinite(r.kkt_max)) j["kkt_max"] = r.kkt_max;
    j["sigma_regular"] = r.sigma_regular;
    j["support_size"] = r.support_size;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Json solution_to_json(const ProblemLCP& prob, const SolveResult& res,
                             bool with_trace = false) {
  Json j;
  j["format"] = "hadopt-solution";
  j["version"] = 1;
  j["problem"] = prob.name();
  j["x"] = vec_to_json(res.point.x);
  j["y"] = vec_to_json(res.point.y);
  j["lambda"] = vec_to_json(res.lambda);
  j["report"] = report_to_json(res.report);
  if (with_trace) j["trace"] = trace_to_json(res.trace);
  return j;
}

struct LoadedSolution {
  VectorXd x;
  std::optional<VectorXd> y;
  std::optional<VectorXd> lambda;
};

inline LoadedSolution solution_from_json(const Json& j) {
  if (j.value("format", "") != std::string("hadopt-solution"))
    throw ParseError("not a solution file");
  LoadedSolution out;
  out.x = vec_from_json(j.at("x"));
  if (j.contains("y")) out.y = vec_from_json(j.at("y"));
  if (j.contains("lambda")) out.lambda = vec_from_json(j.at("lambda"));
  return out;
}

// Accepts a bare array, {"y": [...]}, {"x": [...]}, or a solution file.
inline VectorXd point_from_json(const Json& j) {
  if (j.is_array()) return vec_from_json(j);
  if (j.is_object()) {
    if (j.contains("y")) return vec_from_json(j.at("y"));
    if (j.contains("x")) return vec_from_json(j.at("x"));
  }
  throw ParseError("expected an array or an object with \"x\" or \"y\"");
}

// ---------------------------------------------------------------------------
// Files.

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const Json& j, int indent = 1) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(indent) << "\n";
  if (!out) throw Error("write failed: " + path);
}

inline ProblemLCP load_problem(const std::string& path) {
  return problem_from_json(load_json(path));
}

inline void save_problem(const std::string& path, const ProblemLCP& prob) {
  save_json(path, problem_to_json(prob));
}

// Undirected weighted edge list "u v w" (1-based), one line per edge.
inline std::string graph_to_edge_list(const MatrixXd& w) {
  std::string out;
  char buf[80];
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = i + 1; j < w.cols(); ++j)
      if (w(i, j) != 0.0) {
        std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n", static_cast<long long>(i + 1),
                      static_cast<long long>(j + 1), w(i, j));
        out += buf;
      }
  return out;
}

}  // namespace hadopt
