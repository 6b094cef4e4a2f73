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

#include <string>

#include "dpeda/service.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dpeda {

// Mounts the service routes on an httplib server:
//   GET  /datasets
//   GET  /datasets/{id}/schema
//   POST /sessions
//   POST /sessions/{id}/query
//   GET  /sessions/{id}/ledger
//   POST /sessions/{id}/synthesize
inline void mount_routes(httplib::Server& server, Service& service) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req, httplib::Response& res, nlohmann::json& out) {
    try {
      out = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      return true;
    } catch (const nlohmann::json::exception& e) {
      res.status = kStatusBadRequest;
      res.set_content(nlohmann::json{{"error", "ParseError"}, {"message", e.what()}}.dump(),
                      "application/json");
      return false;
    }
  };

  server.Get("/datasets", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.list_datasets());
  });
  server.Get(R"(/datasets/([^/]+)/schema)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.dataset_schema(req.matches[1]));
             });
  server.Post("/sessions",
              [&service, reply, parse](const httplib::Request& req, httplib::Response& res) {
                nlohmann::json body;
                if (parse(req, res, body)) reply(res, service.post_session(body));
              });
  server.Post(R"(/sessions/([^/]+)/query)",
              [&service, reply, parse](const httplib::Request& req, httplib::Response& res) {
                nlohmann::json body;
                if (parse(req, res, body)) reply(res, service.post_query(req.matches[1], body));
              });
  server.Get(R"(/sessions/([^/]+)/ledger)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_ledger(req.matches[1]));
             });
  server.Post(R"(/sessions/([^/]+)/synthesize)",
              [&service, reply, parse](const httplib::Request& req, httplib::Response& res) {
                nlohmann::json body;
                if (parse(req, res, body)) {
                  reply(res, service.post_synthesize(req.matches[1], body));
                }
              });
}

}  // namespace dpeda
