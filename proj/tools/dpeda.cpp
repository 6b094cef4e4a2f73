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

// dpeda command-line front end.
//
//   dpeda budget     cumulative privacy loss of the basic EDA per schema
//   dpeda accuracy   relative error: interactive vs synthetic
//   dpeda synthesize write a DP synthetic copy of a dataset
//   dpeda generate   write a generated fixture dataset and its schema
//   dpeda serve      run the HTTP query service

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpeda/core.hpp"
#include "dpeda/desk_data.hpp"
#include "dpeda/eda.hpp"
#include "dpeda/harness.hpp"
#include "dpeda/http_service.hpp"
#include "dpeda/service.hpp"
#include "dpeda/synthesizer.hpp"

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dpeda::ConfigError("out: cannot open '" + path + "' for writing");
  return out;
}

dpeda::Dataset load(const std::string& data, const std::string& schema_path, bool coerce) {
  auto schema = std::make_shared<const dpeda::Schema>(dpeda::load_schema_file(schema_path));
  return dpeda::load_dataset_file(data, schema,
                                  coerce ? dpeda::IngestPolicy::kCoerce : dpeda::IngestPolicy::kStrict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private exploratory data analysis"};
  app.require_subcommand(1);

  // budget --------------------------------------------------------------
  std::vector<std::string> b_data, b_schema;
  double b_eps = 0.01, b_budget = 0.0;
  std::uint64_t b_seed = 1;
  std::string b_out, b_totals;
  bool b_coerce = false;
  auto* budget = app.add_subcommand("budget", "Cumulative privacy loss of the basic EDA");
  budget->add_option("--data", b_data, "CSV file (repeat once per schema)")->required();
  budget->add_option("--schema", b_schema, "Schema JSON (repeat, same order as --data)")->required();
  budget->add_option("--eps-i", b_eps, "Privacy loss per query")->check(CLI::PositiveNumber);
  budget->add_option("--budget", b_budget, "Total budget per schema (default: closed form)");
  budget->add_option("--seeds", b_seed, "Noise seed");
  budget->add_option("--out", b_out, "Cumulative ledger CSV")->required();
  budget->add_option("--totals", b_totals, "Closed-form totals CSV");
  budget->add_flag("--coerce", b_coerce, "Unparsable or out-of-domain cells become missing");

  // accuracy ------------------------------------------------------------
  std::string a_data, a_schema, a_out, a_summary, a_mode = "both", a_missing;
  dpeda::AccuracyConfig acfg;
  double a_synth_eps = 0.0;
  bool a_no_noise = false, a_coerce = false;
  auto* accuracy = app.add_subcommand("accuracy", "Relative error: interactive vs synthetic");
  accuracy->add_option("--data", a_data, "CSV file")->required();
  accuracy->add_option("--schema", a_schema, "Schema JSON")->required();
  accuracy->add_option("--eps-i", acfg.eps_i, "Privacy loss per query")->check(CLI::PositiveNumber);
  accuracy->add_option("--budget", acfg.total_budget, "Interactive budget (default: closed form)");
  accuracy->add_option("--seeds", acfg.seeds, "Comma-separated seeds")->delimiter(',');
  accuracy->add_option("--mode", a_mode, "interactive | synthetic | both")
      ->check(CLI::IsMember({"interactive", "synthetic", "both"}));
  accuracy->add_option("--synth-eps", a_synth_eps, "Synthesizer budget (default: CORR closed form)");
  accuracy->add_option("--degree", acfg.degree, "Bayesian network degree");
  accuracy->add_option("--bins", acfg.bins, "Bins per numeric column for the synthesizer");
  accuracy->add_option("--missing-column", a_missing, "Column receiving 10% missing values");
  accuracy->add_option("--out", a_out, "Error records CSV")->required();
  accuracy->add_option("--summary", a_summary, "Five-number summary CSV");
  accuracy->add_flag("--test-mode", acfg.test_mode, "Also write true and released values");
  accuracy->add_flag("--no-noise", a_no_noise, "Disable all noise (sanity check)");
  accuracy->add_flag("--coerce", a_coerce, "Unparsable or out-of-domain cells become missing");

  // synthesize ----------------------------------------------------------
  std::string s_data, s_schema, s_out, s_prov;
  double s_eps = 0.51;
  std::size_t s_degree = 4, s_bins = 20;
  std::uint64_t s_seed = 1;
  bool s_coerce = false;
  auto* synth = app.add_subcommand("synthesize", "Write a differentially private synthetic copy");
  synth->add_option("--data", s_data, "CSV file")->required();
  synth->add_option("--schema", s_schema, "Schema JSON")->required();
  synth->add_option("--synth-eps", s_eps, "Synthesizer budget")->check(CLI::PositiveNumber);
  synth->add_option("--degree", s_degree, "Bayesian network degree");
  synth->add_option("--bins", s_bins, "Bins per numeric column");
  synth->add_option("--seeds", s_seed, "Seed");
  synth->add_option("--out", s_out, "Synthetic CSV")->required();
  synth->add_option("--provenance", s_prov, "Provenance JSON (default: <out>.provenance.json)");
  synth->add_flag("--coerce", s_coerce, "Unparsable or out-of-domain cells become missing");

  // generate ------------------------------------------------------------
  dpeda::DeskSpec g;
  std::string g_out, g_schema_out;
  auto* generate = app.add_subcommand("generate", "Write a generated fixture dataset");
  generate->add_option("--rows", g.rows, "Rows");
  generate->add_option("--numeric", g.numeric, "Numeric columns");
  generate->add_option("--categorical", g.categorical, "Categorical columns");
  generate->add_option("--seeds", g.seed, "Seed");
  generate->add_option("--name", g.name, "Schema name");
  generate->add_option("--out", g_out, "CSV output")->required();
  generate->add_option("--schema-out", g_schema_out, "Schema JSON output")->required();

  // serve ---------------------------------------------------------------
  std::vector<std::string> v_datasets;
  std::string v_host = "127.0.0.1", v_journal;
  int v_port = 8080;
  dpeda::ServiceConfig vcfg;
  auto* serve = app.add_subcommand("serve", "Run the HTTP query service");
  serve->add_option("--dataset", v_datasets, "id=data.csv:schema.json (repeatable)")->required();
  serve->add_option("--host", v_host, "Bind address");
  serve->add_option("--port", v_port, "Port");
  serve->add_option("--journal", vcfg.journal_path, "Append-only budget journal");
  serve->add_option("--max-eps-i", vcfg.max_eps_i, "Largest eps_i a query may request");
  serve->add_flag("--test-mode", vcfg.test_mode, "Expose true values (never on real data)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*budget) {
      if (b_data.size() != b_schema.size()) {
        throw dpeda::ConfigError("schema: one --schema is required per --data");
      }
      std::vector<dpeda::BudgetInput> inputs;
      for (std::size_t i = 0; i < b_data.size(); ++i) {
        auto ds = load(b_data[i], b_schema[i], b_coerce);
        inputs.push_back({ds.schema().name(), std::move(ds)});
      }
      const auto series = dpeda::run_budget_experiment(inputs, b_eps, b_budget, b_seed);
      auto out = open_out(b_out);
      dpeda::write_budget_csv(out, series);
      if (!b_totals.empty()) {
        auto totals = open_out(b_totals);
        dpeda::write_budget_totals_csv(totals, series);
      }
      dpeda::write_budget_totals_csv(std::cout, series);
      for (const auto& s : series) {
        if (!s.completed) std::cerr << s.schema << ": " << s.error << '\n';
      }
      return 0;
    }

    if (*accuracy) {
      auto ds = load(a_data, a_schema, a_coerce);
      acfg.schema_name = ds.schema().name();
      acfg.mode = a_mode == "interactive" ? dpeda::ExperimentMode::kInteractive
                  : a_mode == "synthetic" ? dpeda::ExperimentMode::kSynthetic
                                          : dpeda::ExperimentMode::kBoth;
      if (a_synth_eps > 0.0) acfg.synth_epsilon = a_synth_eps;
      if (!a_missing.empty()) acfg.missing_column = a_missing;
      acfg.add_noise = !a_no_noise;
      const auto result = dpeda::run_accuracy_experiment(ds, acfg);
      auto out = open_out(a_out);
      dpeda::write_errors_csv(out, result.records, acfg.test_mode);
      const auto summary = dpeda::summarize(result.records);
      if (!a_summary.empty()) {
        auto s = open_out(a_summary);
        dpeda::write_summary_csv(s, summary);
      }
      dpeda::write_summary_csv(std::cout, summary);
      return 0;
    }

    if (*synth) {
      auto ds = load(s_data, s_schema, s_coerce);
      dpeda::Rng rng(s_seed);
      dpeda::SynthesizerConfig sc;
      sc.degree = s_degree;
      sc.bins = s_bins;
      const auto result = dpeda::synthesize(ds, s_eps, s_degree, rng, sc);
      auto out = open_out(s_out);
      dpeda::write_csv(out, result.data);
      auto prov = open_out(s_prov.empty() ? s_out + ".provenance.json" : s_prov);
      prov << dpeda::to_json(result.provenance, result.network, ds.schema()).dump(2) << '\n';
      return 0;
    }

    if (*generate) {
      const auto ds = dpeda::make_desk_dataset(g);
      auto out = open_out(g_out);
      dpeda::write_csv(out, ds);
      auto schema = open_out(g_schema_out);
      schema << dpeda::schema_to_json(ds.schema()).dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      dpeda::Service service(vcfg);
      for (const auto& spec : v_datasets) {
        const auto eq = spec.find('=');
        const auto colon = spec.rfind(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
          throw dpeda::ConfigError("dataset: expected id=data.csv:schema.json, got '" + spec + "'");
        }
        service.register_dataset(spec.substr(0, eq),
                                 load(spec.substr(eq + 1, colon - eq - 1), spec.substr(colon + 1),
                                      false));
      }
      service.start();
      httplib::Server server;
      dpeda::mount_routes(server, service);
      std::cerr << "listening on " << v_host << ':' << v_port << '\n';
      if (!server.listen(v_host, v_port)) {
        std::cerr << "cannot bind " << v_host << ':' << v_port << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const dpeda::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
