//
// Copyright 2026 The dpeda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "dpeda/accountant.hpp"
#include "dpeda/core.hpp"
#include "dpeda/eda.hpp"
#include "dpeda/error.hpp"
#include "dpeda/mechanisms.hpp"
#include "dpeda/synthesizer.hpp"
#include "json.hpp"

namespace dpeda {

struct ServiceConfig {
  // Attach true values to responses. Never enable against real data.
  bool test_mode = false;
  // Upper bound on a per-query eps_i override.
  double max_eps_i = 1.0;
  // Append-only journal of sessions and accepted charges; empty disables it.
  std::string journal_path;
  EdaConfig eda;
  SynthesizerConfig synthesizer;
};

// HTTP-agnostic response: status code plus JSON body.
struct Response {
  int status = 200;
  nlohmann::json body;
};

// Status codes used by the API.
inline constexpr int kStatusCreated = 201;
inline constexpr int kStatusBadRequest = 400;
inline constexpr int kStatusRefused = 403;  // budget exhausted
inline constexpr int kStatusNotFound = 404;
inline constexpr int kStatusDependency = 409;

// Interactive query-response service. Datasets are registered by the operator
// before `start()`; analysts open sessions, each with its own ledger, and
// every query is metered through that ledger before anything is computed.
class Service {
 public:
  explicit Service(ServiceConfig config = {}) : config_(std::move(config)) {}

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void register_dataset(const std::string& id, Dataset data) {
    std::unique_lock lock(mu_);
    if (started_) throw ParamError("datasets must be registered before start()");
    datasets_[id] = DatasetEntry{std::make_shared<const Dataset>(std::move(data)), false, ""};
  }

  // Replays the journal (if any) and opens it for appending.
  void start() {
    std::unique_lock lock(mu_);
    if (started_) return;
    if (!config_.journal_path.empty()) {
      replay_journal_locked();
      journal_.open(config_.journal_path, std::ios::app);
      if (!journal_) throw ParamError("cannot open journal '" + config_.journal_path + "'");
    }
    started_ = true;
  }

  // ---- typed API --------------------------------------------------------

  std::string create_session(const std::string& dataset_id, double budget, double eps_i_default) {
    if (!(eps_i_default > 0.0) || eps_i_default > config_.max_eps_i) {
      throw ParamError("eps_i_default must lie in (0, " + format_real(config_.max_eps_i) + "]");
    }
    std::unique_lock lock(mu_);
    ensure_started_locked();
    auto it = datasets_.find(dataset_id);
    if (it == datasets_.end() || it->second.synthetic) {
      throw NotFound("unknown dataset '" + dataset_id + "'");
    }
    const std::string id = fresh_session_id_locked();
    auto session = make_session_locked(id, dataset_id, budget, eps_i_default);
    journal_write_locked({{"type", "session"},
                          {"session", id},
                          {"dataset", dataset_id},
                          {"budget", budget},
                          {"eps_i_default", eps_i_default},
                          {"created", session->created}});
    sessions_[id] = std::move(session);
    return id;
  }

  // ---- JSON API (mirrors the HTTP routes) ---------------------------------

  Response list_datasets() const {
    std::shared_lock lock(mu_);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, entry] : datasets_) {
      const Schema& s = entry.data->schema();
      out.push_back({{"id", id},
                     {"name", s.name()},
                     {"numeric", s.numeric_count()},
                     {"categorical", s.categorical_count()},
                     {"synthetic", entry.synthetic}});
    }
    return {200, out};
  }

  Response dataset_schema(const std::string& id) const {
    return guarded([&]() -> Response {
      std::shared_lock lock(mu_);
      auto it = datasets_.find(id);
      if (it == datasets_.end()) throw NotFound("unknown dataset '" + id + "'");
      return {200, schema_to_json(it->second.data->schema())};
    });
  }

  // Body: {"dataset": id, "budget": eps_total, "eps_i_default": eps_i}
  Response post_session(const nlohmann::json& body) {
    return guarded([&]() -> Response {
      const std::string dataset = field<std::string>(body, "dataset");
      const double budget = field<double>(body, "budget");
      const double eps_default = body.contains("eps_i_default")
                                     ? field<double>(body, "eps_i_default")
                                     : 0.01;
      const std::string id = create_session(dataset, budget, eps_default);
      return {kStatusCreated,
              {{"session", id}, {"dataset", dataset}, {"budget", budget}, {"remaining", budget},
               {"eps_i_default", eps_default}}};
    });
  }

  // Body: {"function": "DIST"|"MISS"|"OUTL"|"CORR", "columns": [...],
  //        "eps_i"?: override, "dataset"?: synthetic dataset id}
  Response post_query(const std::string& session_id, const nlohmann::json& body) {
    return guarded([&]() -> Response {
      auto session = find_session(session_id);
      std::string function = field<std::string>(body, "function");
      for (char& ch : function) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      const auto columns = field<std::vector<std::string>>(body, "columns");
      double eps_i = session->eps_i_default;
      if (body.contains("eps_i")) {
        eps_i = field<double>(body, "eps_i");
        if (!(eps_i > 0.0) || eps_i > config_.max_eps_i) {
          throw ParamError("eps_i must lie in (0, " + format_real(config_.max_eps_i) + "]");
        }
      }

      std::shared_ptr<const Dataset> data;
      bool synthetic = false;
      std::string dataset_id = session->dataset_id;
      if (body.contains("dataset") && field<std::string>(body, "dataset") != session->dataset_id) {
        dataset_id = field<std::string>(body, "dataset");
        std::shared_lock lock(mu_);
        auto it = datasets_.find(dataset_id);
        if (it == datasets_.end() || !it->second.synthetic || it->second.owner != session_id) {
          throw NotFound("unknown synthetic dataset '" + dataset_id + "' for this session");
        }
        data = it->second.data;
        synthetic = true;
      } else {
        data = dataset_for(session->dataset_id);
      }

      std::lock_guard session_lock(session->mu);
      // Synthetic tables are already private: query them exactly against a
      // scratch ledger so the session ledger is not touched.
      Ledger scratch(1e9);
      NoiseSource exact(Rng(0), {false, false});
      Ledger& ledger = synthetic ? scratch : *session->ledger;
      NoiseSource& noise = synthetic ? exact : session->noise;
      auto& quartiles = session->quartiles[dataset_id];

      EdaEntry entry = evaluate(*data, function, columns, eps_i, ledger, noise, quartiles);
      const double charged = synthetic ? 0.0 : entry.epsilon_charged;
      nlohmann::json out = to_json(entry);
      out["epsilon_charged"] = charged;
      out["remaining"] = session->ledger->remaining();
      out["dataset"] = dataset_id;
      return {200, out};
    });
  }

  Response get_ledger(const std::string& session_id) const {
    return guarded([&]() -> Response {
      auto session = find_session(session_id);
      nlohmann::json out = to_json(session->ledger->report());
      out["session"] = session_id;
      return {200, out};
    });
  }

  // Body: {"epsilon": eps, "degree"?: k}
  Response post_synthesize(const std::string& session_id, const nlohmann::json& body) {
    return guarded([&]() -> Response {
      auto session = find_session(session_id);
      const double epsilon = field<double>(body, "epsilon");
      const std::size_t degree =
          body.contains("degree") ? field<std::size_t>(body, "degree") : config_.synthesizer.degree;
      if (!(epsilon > 0.0)) throw ParamError("epsilon must be > 0");
      if (degree < 1) throw ParamError("degree must be >= 1");
      auto data = dataset_for(session->dataset_id);

      std::lock_guard session_lock(session->mu);
      session->ledger->require({{epsilon, "SYNTH(k=" + std::to_string(degree) + ")",
                                 Composition::kSequential, 1}});
      SynthesizerConfig sc = config_.synthesizer;
      sc.degree = degree;
      auto result = synthesize(*data, epsilon, degree, session->noise.rng(), sc);

      std::unique_lock lock(mu_);
      const std::string id = "syn-" + std::to_string(++synthetic_counter_);
      nlohmann::json provenance = to_json(result.provenance, result.network, data->schema());
      datasets_[id] =
          DatasetEntry{std::make_shared<const Dataset>(std::move(result.data)), true, session_id};
      return {kStatusCreated,
              {{"dataset", id},
               {"epsilon_charged", epsilon},
               {"remaining", session->ledger->remaining()},
               {"provenance", std::move(provenance)}}};
    });
  }

  const ServiceConfig& config() const { return config_; }

 private:
  struct DatasetEntry {
    std::shared_ptr<const Dataset> data;
    bool synthetic = false;
    std::string owner;  // session that paid for a synthetic dataset
  };

  struct Session {
    std::string id;
    std::string dataset_id;
    double eps_i_default = 0.01;
    std::uint64_t created = 0;
    std::unique_ptr<Ledger> ledger;
    std::mutex mu;  // serializes evaluation and the noise stream
    NoiseSource noise{0};
    std::map<std::string, std::map<std::string, std::pair<double, double>>> quartiles;
  };

  template <typename T>
  static T field(const nlohmann::json& body, const char* name) {
    if (!body.is_object() || !body.contains(name)) {
      throw ParamError(std::string("missing field '") + name + "'");
    }
    try {
      return body.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ParamError(std::string("field '") + name + "' has the wrong type");
    }
  }

  template <typename Fn>
  static Response guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const BudgetExhausted& e) {
      return {kStatusRefused, {{"error", e.kind()}, {"remaining", e.remaining()},
                               {"message", e.what()}}};
    } catch (const MissingPrerequisite& e) {
      return {kStatusDependency, {{"error", e.kind()}, {"prerequisite", e.prerequisite()},
                                  {"message", e.what()}}};
    } catch (const NotFound& e) {
      return {kStatusNotFound, {{"error", e.kind()}, {"message", e.what()}}};
    } catch (const Error& e) {
      return {kStatusBadRequest, {{"error", e.kind()}, {"message", e.what()}}};
    }
  }

  static EdaEntry evaluate(const Dataset& ds, const std::string& function,
                           const std::vector<std::string>& columns, double eps_i, Ledger& ledger,
                           NoiseSource& noise,
                           std::map<std::string, std::pair<double, double>>& quartiles) {
    const Schema& schema = ds.schema();
    auto expect = [&](std::size_t n) {
      if (columns.size() != n) {
        throw ParamError(function + " takes " + std::to_string(n) + " column(s)");
      }
      for (const auto& c : columns) schema.index_of(c);
    };
    if (function == "DIST") {
      expect(1);
      if (schema.column(schema.index_of(columns[0])).is_numeric()) {
        auto r = dist_numeric(ds, columns[0], eps_i, ledger, noise);
        quartiles[r.column] = {r.q1.value, r.q3.value};
        return to_entry(r);
      }
      return to_entry(dist_categorical(ds, columns[0], eps_i, ledger, noise));
    }
    if (function == "MISS") {
      expect(1);
      return to_entry("MISS", columns[0], missing_count(ds, columns[0], eps_i, ledger, noise));
    }
    if (function == "OUTL") {
      expect(1);
      detail::require_kind(ds, columns[0], ColumnKind::kNumeric, "OUTL");
      auto it = quartiles.find(columns[0]);
      if (it == quartiles.end()) {
        throw MissingPrerequisite("DIST", "OUTL(" + columns[0] +
                                              ") needs the quartiles released by DIST first");
      }
      return to_entry("OUTL", columns[0],
                      outlier_count(ds, columns[0], eps_i, ledger, noise, it->second.first,
                                    it->second.second));
    }
    if (function == "CORR") {
      expect(2);
      const bool na = schema.column(schema.index_of(columns[0])).is_numeric();
      const bool nb = schema.column(schema.index_of(columns[1])).is_numeric();
      if (na != nb) throw KindError("CORR: mixed numeric/categorical pairs are not supported");
      return to_entry(na ? spearman_dp(ds, columns[0], columns[1], eps_i, ledger, noise)
                         : cramers_v_dp(ds, columns[0], columns[1], eps_i, ledger, noise));
    }
    throw ParamError("unknown function '" + function + "'");
  }

  std::shared_ptr<Session> find_session(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<const Dataset> dataset_for(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) throw NotFound("dataset '" + id + "' is not registered");
    return it->second.data;
  }

  void ensure_started_locked() {
    if (!started_) {
      if (!config_.journal_path.empty()) {
        throw ParamError("service not started");
      }
      started_ = true;
    }
  }

  std::string fresh_session_id_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    for (;;) {
      std::uint64_t bits = id_rng_();
      std::string id = "s-";
      for (int i = 0; i < 16; ++i, bits >>= 4) id.push_back(kHex[bits & 0xF]);
      if (sessions_.count(id) == 0) return id;
    }
  }

  std::shared_ptr<Session> make_session_locked(const std::string& id, const std::string& dataset,
                                               double budget, double eps_default) {
    auto session = std::make_shared<Session>();
    session->id = id;
    session->dataset_id = dataset;
    session->eps_i_default = eps_default;
    session->created = next_ordinal_++;
    session->ledger = std::make_unique<Ledger>(budget, [this, id](const Charge& c) {
      std::lock_guard jl(journal_mu_);
      if (replaying_ || !journal_.is_open()) return;
      journal_ << nlohmann::json{{"type", "charge"},
                                 {"session", id},
                                 {"index", c.index},
                                 {"epsilon", c.epsilon},
                                 {"label", c.label},
                                 {"composition", std::string(to_string(c.composition))},
                                 {"group_size", c.group_size}}
                      .dump()
               << '\n';
      journal_.flush();
    });
    session->noise = NoiseSource(Rng(std::random_device{}()), {true, config_.test_mode});
    return session;
  }

  void journal_write_locked(const nlohmann::json& record) {
    std::lock_guard jl(journal_mu_);
    if (!journal_.is_open()) return;
    journal_ << record.dump() << '\n';
    journal_.flush();
  }

  void replay_journal_locked() {
    std::ifstream in(config_.journal_path);
    if (!in) return;
    replaying_ = true;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        replaying_ = false;
        throw ParamError("journal line " + std::to_string(line_no) + " is not valid JSON");
      }
      const std::string type = rec.value("type", "");
      const std::string id = rec.value("session", "");
      if (type == "session") {
        sessions_[id] = make_session_locked(id, rec.at("dataset").get<std::string>(),
                                            rec.at("budget").get<double>(),
                                            rec.at("eps_i_default").get<double>());
      } else if (type == "charge") {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) continue;
        const auto comp = rec.value("composition", "sequential") == "parallel"
                              ? Composition::kParallelGroup
                              : Composition::kSequential;
        it->second->ledger->charge({rec.at("epsilon").get<double>(),
                                    rec.at("label").get<std::string>(), comp,
                                    rec.value("group_size", std::size_t{1})});
      }
    }
    replaying_ = false;
  }

  ServiceConfig config_;
  mutable std::shared_mutex mu_;
  bool started_ = false;
  std::map<std::string, DatasetEntry> datasets_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t synthetic_counter_ = 0;
  std::uint64_t next_ordinal_ = 0;
  std::mt19937_64 id_rng_{std::random_device{}()};

  std::mutex journal_mu_;
  std::ofstream journal_;
  std::atomic<bool> replaying_{false};
};

}  // namespace dpeda
