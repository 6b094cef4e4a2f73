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

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "dpeda/desk_data.hpp"
#include "dpeda/http_service.hpp"
#include "dpeda/service.hpp"
#include "gtest/gtest.h"

namespace dpeda {
namespace {

using nlohmann::json;

Dataset Desk() { return make_desk_dataset({"desk", 500, 3, 3, 11, 0.02}); }

std::string OpenSession(Service& service, double budget, double eps = 0.01) {
  const Response r = service.post_session({{"dataset", "desk"}, {"budget", budget},
                                           {"eps_i_default", eps}});
  EXPECT_EQ(r.status, kStatusCreated) << r.body.dump();
  return r.body.value("session", "");
}

ServiceConfig TestModeConfig() {
  ServiceConfig c;
  c.test_mode = true;
  return c;
}

ServiceConfig JournalConfig(const std::string& path) {
  ServiceConfig c;
  c.journal_path = path;
  return c;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_.register_dataset("desk", Desk());
    service_.start();
  }
  Service service_;
};

TEST_F(ServiceTest, DatasetsAndSchema) {
  const Response list = service_.list_datasets();
  ASSERT_EQ(list.body.size(), 1u);
  EXPECT_EQ(list.body[0]["id"], "desk");
  EXPECT_EQ(list.body[0]["numeric"], 3);
  const Response schema = service_.dataset_schema("desk");
  EXPECT_EQ(schema.status, 200);
  EXPECT_EQ(schema.body["columns"].size(), 6u);
  EXPECT_EQ(service_.dataset_schema("nope").status, kStatusNotFound);
}

TEST_F(ServiceTest, CreateSession) {
  const std::string id = OpenSession(service_, 3.0);
  const Response ledger = service_.get_ledger(id);
  EXPECT_EQ(ledger.body["remaining"], 3.0);
  EXPECT_TRUE(ledger.body["charges"].empty());
  EXPECT_EQ(service_.post_session({{"dataset", "desk"}, {"budget", 0.0}}).status,
            kStatusBadRequest);
  EXPECT_EQ(service_.post_session({{"dataset", "nope"}, {"budget", 1.0}}).status,
            kStatusNotFound);
  EXPECT_EQ(service_.post_session({{"budget", 1.0}}).status, kStatusBadRequest);
}

TEST_F(ServiceTest, SessionsAreIsolated) {
  const std::string a = OpenSession(service_, 1.0);
  const std::string b = OpenSession(service_, 1.0);
  EXPECT_NE(a, b);
  service_.post_query(a, {{"function", "MISS"}, {"columns", {"num0"}}});
  EXPECT_EQ(service_.get_ledger(a).body["spent"], 0.01);
  EXPECT_EQ(service_.get_ledger(b).body["spent"], 0.0);
}

TEST_F(ServiceTest, DistDebitsFiveQueries) {
  const std::string id = OpenSession(service_, 1.0);
  const Response r = service_.post_query(id, {{"function", "DIST"}, {"columns", {"num1"}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["remaining"], 0.95);
  EXPECT_DOUBLE_EQ(r.body["epsilon_charged"].get<double>(), 0.05);
  EXPECT_EQ(r.body["values"].size(), 5u);
}

TEST_F(ServiceTest, RefusalLeavesStateUnchanged) {
  const std::string id = OpenSession(service_, 0.03);
  service_.post_query(id, {{"function", "MISS"}, {"columns", {"num0"}}});
  const Response refused = service_.post_query(id, {{"function", "DIST"}, {"columns", {"num0"}}});
  EXPECT_EQ(refused.status, kStatusRefused);
  EXPECT_EQ(refused.body["error"], "BudgetExhausted");
  EXPECT_DOUBLE_EQ(refused.body["remaining"].get<double>(), 0.02);
  const Response ledger = service_.get_ledger(id);
  EXPECT_EQ(ledger.body["charges"].size(), 1u);
  EXPECT_DOUBLE_EQ(ledger.body["remaining"].get<double>(), 0.02);
}

TEST_F(ServiceTest, OutlierNeedsDistFirst) {
  const std::string id = OpenSession(service_, 1.0);
  const Response dep = service_.post_query(id, {{"function", "OUTL"}, {"columns", {"num0"}}});
  EXPECT_EQ(dep.status, kStatusDependency);
  EXPECT_EQ(dep.body["prerequisite"], "DIST");
  EXPECT_EQ(service_.get_ledger(id).body["spent"], 0.0);
  service_.post_query(id, {{"function", "DIST"}, {"columns", {"num0"}}});
  EXPECT_EQ(service_.post_query(id, {{"function", "outl"}, {"columns", {"num0"}}}).status, 200);
}

TEST_F(ServiceTest, BadQueries) {
  const std::string id = OpenSession(service_, 1.0);
  EXPECT_EQ(service_.post_query(id, {{"function", "AVG"}, {"columns", {"num0"}}}).status,
            kStatusBadRequest);
  EXPECT_EQ(service_.post_query(id, {{"function", "CORR"}, {"columns", {"num0"}}}).status,
            kStatusBadRequest);
  EXPECT_EQ(service_.post_query(id, {{"function", "CORR"}, {"columns", {"num0", "cat0"}}}).status,
            kStatusBadRequest);
  EXPECT_EQ(service_.post_query(id, {{"function", "MISS"}, {"columns", {"zzz"}}}).status,
            kStatusNotFound);
  EXPECT_EQ(service_.post_query("s-none", {{"function", "MISS"}, {"columns", {"num0"}}}).status,
            kStatusNotFound);
  EXPECT_EQ(service_.get_ledger(id).body["spent"], 0.0);
}

TEST_F(ServiceTest, EpsOverrideIsBounded) {
  const std::string id = OpenSession(service_, 5.0);
  const Response ok =
      service_.post_query(id, {{"function", "MISS"}, {"columns", {"num0"}}, {"eps_i", 0.5}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body["remaining"], 4.5);
  EXPECT_EQ(service_.post_query(id, {{"function", "MISS"}, {"columns", {"num0"}}, {"eps_i", 1.5}})
                .status,
            kStatusBadRequest);
  EXPECT_EQ(service_.post_query(id, {{"function", "MISS"}, {"columns", {"num0"}}, {"eps_i", 0.0}})
                .status,
            kStatusBadRequest);
}

TEST_F(ServiceTest, LedgerReport) {
  const std::string id = OpenSession(service_, 1.0);
  service_.post_query(id, {{"function", "DIST"}, {"columns", {"cat0"}}});
  service_.post_query(id, {{"function", "MISS"}, {"columns", {"num2"}}});
  service_.post_query(id, {{"function", "CORR"}, {"columns", {"num2", "num0"}}});
  const json ledger = service_.get_ledger(id).body;
  ASSERT_EQ(ledger["charges"].size(), 3u);
  EXPECT_EQ(ledger["charges"][2]["label"], "CORR(num0,num2)");
  double prev = 0.0;
  for (const auto& c : ledger["charges"]) {
    EXPECT_GE(c["cumulative"].get<double>(), prev);
    prev = c["cumulative"].get<double>();
  }
  EXPECT_EQ(prev, ledger["spent"].get<double>());
  EXPECT_EQ(prev, 0.03);
}

TEST_F(ServiceTest, SynthesizeDebitsOnceAndQueriesAreFree) {
  const std::string id = OpenSession(service_, 1.0);
  const Response syn = service_.post_synthesize(id, {{"epsilon", 0.51}, {"degree", 4}});
  ASSERT_EQ(syn.status, kStatusCreated) << syn.body.dump();
  EXPECT_EQ(syn.body["remaining"], 0.49);
  EXPECT_EQ(syn.body["provenance"]["epsilon_structure"], 0.255);
  const std::string syn_id = syn.body["dataset"];
  for (const char* f : {"DIST", "MISS"}) {
    const Response r =
        service_.post_query(id, {{"function", f}, {"columns", {"num0"}}, {"dataset", syn_id}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body["epsilon_charged"], 0.0);
  }
  EXPECT_EQ(service_.post_query(id, {{"function", "OUTL"}, {"columns", {"num0"}},
                                     {"dataset", syn_id}})
                .status,
            200);
  EXPECT_EQ(service_.get_ledger(id).body["spent"], 0.51);
  EXPECT_EQ(service_.get_ledger(id).body["charges"].size(), 1u);
  // Too expensive now.
  const Response refused = service_.post_synthesize(id, {{"epsilon", 0.51}});
  EXPECT_EQ(refused.status, kStatusRefused);
  EXPECT_EQ(service_.get_ledger(id).body["spent"], 0.51);
  // Another session may not use it, and it cannot seed a new session.
  const std::string other = OpenSession(service_, 1.0);
  EXPECT_EQ(service_.post_query(other, {{"function", "MISS"}, {"columns", {"num0"}},
                                        {"dataset", syn_id}})
                .status,
            kStatusNotFound);
  EXPECT_EQ(service_.post_session({{"dataset", syn_id}, {"budget", 1.0}}).status, kStatusNotFound);
}

TEST_F(ServiceTest, NoTrueValuesOutsideTestMode) {
  const std::string id = OpenSession(service_, 1.0);
  const Response r = service_.post_query(id, {{"function", "DIST"}, {"columns", {"num0"}}});
  EXPECT_EQ(r.body.dump().find("true_value"), std::string::npos);
  Service test_service(TestModeConfig());
  test_service.register_dataset("desk", Desk());
  test_service.start();
  const std::string tid = OpenSession(test_service, 1.0);
  const Response t = test_service.post_query(tid, {{"function", "MISS"}, {"columns", {"num0"}}});
  EXPECT_NE(t.body.dump().find("true_value"), std::string::npos);
}

TEST_F(ServiceTest, ConcurrentClientsNeverOverspend) {
  const std::string id = OpenSession(service_, 1.0);
  std::atomic<int> accepted{0}, refused{0};
  std::vector<std::thread> clients;
  for (int t = 0; t < 8; ++t) {
    clients.emplace_back([&, t] {
      for (int i = 0; i < 40; ++i) {
        const char* col = (t + i) % 2 ? "num0" : "cat1";
        const Response r = service_.post_query(id, {{"function", "MISS"}, {"columns", {col}}});
        (r.status == 200 ? accepted : refused)++;
      }
    });
  }
  for (auto& c : clients) c.join();
  EXPECT_EQ(accepted.load(), 100);
  EXPECT_EQ(refused.load(), 220);
  EXPECT_EQ(service_.get_ledger(id).body["spent"], 1.0);
}

TEST(ServiceJournal, RestartPreservesSpentBudget) {
  const auto path = std::filesystem::temp_directory_path() / "dpeda_service_journal.jsonl";
  std::filesystem::remove(path);
  std::string id;
  {
    Service s(JournalConfig(path.string()));
    s.register_dataset("desk", Desk());
    s.start();
    id = OpenSession(s, 0.5);
    s.post_query(id, {{"function", "DIST"}, {"columns", {"num0"}}});
    s.post_query(id, {{"function", "DIST"}, {"columns", {"cat2"}}});
    s.post_synthesize(id, {{"epsilon", 0.1}, {"degree", 2}});
    s.post_query(id, {{"function", "DIST"}, {"columns", {"num1"}}, {"eps_i", 0.9}});  // refused
  }
  Service restarted(JournalConfig(path.string()));
  restarted.register_dataset("desk", Desk());
  restarted.start();
  const json ledger = restarted.get_ledger(id).body;
  EXPECT_EQ(ledger["spent"], 0.16);
  EXPECT_EQ(ledger["charges"].size(), 7u);
  EXPECT_EQ(ledger["charges"][6]["label"], "SYNTH(k=2)");
  // Charges made after the restart land in the same journal.
  restarted.post_query(id, {{"function", "MISS"}, {"columns", {"num1"}}});
  Service again(JournalConfig(path.string()));
  again.register_dataset("desk", Desk());
  again.start();
  EXPECT_EQ(again.get_ledger(id).body["spent"], 0.17);
  std::filesystem::remove(path);
}

TEST(ServiceJournal, CorruptJournalIsRejected) {
  const auto path = std::filesystem::temp_directory_path() / "dpeda_bad_journal.jsonl";
  {
    std::ofstream out(path);
    out << "{not json\n";
  }
  Service s(JournalConfig(path.string()));
  EXPECT_THROW(s.start(), ParamError);
  std::filesystem::remove(path);
}

TEST(HttpService, RoundTrip) {
  Service service;
  service.register_dataset("desk", Desk());
  service.start();
  httplib::Server server;
  mount_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto datasets = client.Get("/datasets");
  ASSERT_TRUE(datasets);
  EXPECT_EQ(datasets->status, 200);
  EXPECT_EQ(json::parse(datasets->body)[0]["id"], "desk");
  EXPECT_EQ(client.Get("/datasets/desk/schema")->status, 200);

  auto created = client.Post("/sessions", R"({"dataset":"desk","budget":0.06})", "application/json");
  ASSERT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["session"];
  auto q = client.Post("/sessions/" + id + "/query", R"({"function":"DIST","columns":["num0"]})",
                       "application/json");
  EXPECT_EQ(q->status, 200);
  EXPECT_NEAR(json::parse(q->body)["remaining"].get<double>(), 0.01, 1e-15);
  auto refused = client.Post("/sessions/" + id + "/query",
                             R"({"function":"DIST","columns":["num0"]})", "application/json");
  EXPECT_EQ(refused->status, 403);
  EXPECT_NEAR(json::parse(refused->body)["remaining"].get<double>(), 0.01, 1e-15);
  EXPECT_EQ(client.Post("/sessions/" + id + "/query", "{oops", "application/json")->status, 400);
  auto ledger = client.Get("/sessions/" + id + "/ledger");
  EXPECT_EQ(json::parse(ledger->body)["charges"].size(), 5u);
  auto syn = client.Post("/sessions/" + id + "/synthesize", R"({"epsilon":0.5})", "application/json");
  EXPECT_EQ(syn->status, 403);
  EXPECT_EQ(client.Get("/sessions/nope/ledger")->status, 404);

  server.stop();
  loop.join();
}

}  // namespace
}  // namespace dpeda
