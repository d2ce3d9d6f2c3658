#include <gtest/gtest.h>

#include <chrono>
#include <memory>
#include <thread>

#include <nlohmann/json.hpp>

#include "ctfkit/data_io.hpp"
#include "ctfkit/error.hpp"
#include "ctfkit/explorer.hpp"
#include "fixtures.hpp"

#include <httplib.h>

using namespace ctfkit;
using nlohmann::json;

namespace {

ExplorerService make_service(std::optional<Dataset> data = std::nullopt, ExplorerLimits limits = {}) {
  return ExplorerService(std::make_shared<const TrainedModel>(fixture::linear_xy(2.0)), std::move(data), limits);
}

json post(const ExplorerService& svc, std::string_view path, const json& body, int expected = 200) {
  const HttpResponse r = svc.handle("POST", path, body.dump());
  EXPECT_EQ(r.status, expected) << r.body;
  return json::parse(r.body);
}

json coupling_request(const std::string& norm, std::size_t n = 500) {
  return json{{"seed", 7}, {"norm", norm}, {"worlds", {"x=4", "x=6"}}, {"node", "y"}, {"n", n}};
}

}  // namespace

TEST(Explorer, ModelInfo) {
  const auto svc = make_service();
  const HttpResponse r = svc.handle("GET", "/model/info", "");
  ASSERT_EQ(r.status, 200);
  const json info = json::parse(r.body);
  EXPECT_EQ(info["d"], 2);
  EXPECT_EQ(info["edges"], json::parse("[[0,1]]"));
  EXPECT_EQ(info["variables"][0]["kind"], "data");
  EXPECT_EQ(info["variables"][1]["kind"], "modeled");
  EXPECT_EQ(info["variables"][1]["noise"]["kind"], "normal");
  EXPECT_TRUE(info.contains("provenance"));
}

TEST(Explorer, UnknownRouteAndMethod) {
  const auto svc = make_service();
  const HttpResponse missing = svc.handle("GET", "/nope", "");
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(json::parse(missing.body)["error_code"], "NotFound");
  EXPECT_EQ(svc.handle("GET", "/coupling", "").status, 405);
}

TEST(Explorer, CouplingComonotonicIsMonotone) {
  const auto svc = make_service();
  const json out = post(svc, "/coupling", coupling_request("comonotonic"));
  EXPECT_EQ(out["pairs"].size(), 500u);
  EXPECT_GE(out["spearman"].get<double>(), 0.99);
  for (const auto& p : out["pairs"]) EXPECT_NEAR(p[1].get<double>() - p[0].get<double>(), 4.0, 1e-9);
  const json counter = post(svc, "/coupling", coupling_request("countermonotonic"));
  EXPECT_LE(counter["spearman"].get<double>(), -0.99);
}

TEST(Explorer, SameRequestSameBytes) {
  const auto svc = make_service();
  const std::string body = coupling_request("gaussian:2").dump();
  const HttpResponse a = svc.handle("POST", "/coupling", body);
  const HttpResponse b = svc.handle("POST", "/coupling", body);
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  json other = coupling_request("gaussian:2");
  other["seed"] = 8;
  EXPECT_NE(svc.handle("POST", "/coupling", other.dump()).body, a.body);
}

TEST(Explorer, CouplingErrors) {
  const auto svc = make_service({}, ExplorerLimits{1000, 5});
  json three = coupling_request("comonotonic");
  three["worlds"] = {"x=1", "x=2", "x=3"};
  EXPECT_EQ(post(svc, "/coupling", three, 400)["error_code"], "WrongWorldCount");
  EXPECT_EQ(post(svc, "/coupling", coupling_request("comonotonic", 1001), 413)["error_code"], "RequestTooLarge");
  EXPECT_EQ(post(svc, "/coupling", coupling_request("sideways"), 400)["error_code"], "UsageError");
  const HttpResponse bad = svc.handle("POST", "/coupling", "{not json");
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(json::parse(bad.body)["error_code"], "UsageError");
  json x_not_set = coupling_request("comonotonic");
  x_not_set["worlds"] = {"identity", "y=1"};
  EXPECT_EQ(post(svc, "/coupling", x_not_set, 400)["error_code"], "MissingRowSource");
  x_not_set["row"] = "resample";
  EXPECT_EQ(post(svc, "/coupling", x_not_set, 400)["error_code"], "MissingRowSource");
}

TEST(Explorer, CouplingRowSources) {
  const auto svc = make_service(gen_toy(100, 1));
  json req = coupling_request("comonotonic", 200);
  req["worlds"] = {"identity", "x+=1"};
  req["row"] = {{"values", {{"x", 3.0}}}};
  for (const auto& p : post(svc, "/coupling", req)["pairs"]) {
    EXPECT_NEAR(p[1].get<double>() - p[0].get<double>(), 2.0, 1e-9);
  }
  req["row"] = "resample";
  EXPECT_EQ(post(svc, "/coupling", req)["pairs"].size(), 200u);
  req["row"] = {{"index", 5}};
  EXPECT_EQ(post(svc, "/coupling", req)["n"], 200);
  req["row"] = {{"index", 500}};
  EXPECT_EQ(post(svc, "/coupling", req, 400)["error_code"], "IndexOutOfRange");
}

TEST(Explorer, CurvesNeverCrossUnderComonotonicity) {
  const auto svc = make_service();
  const json req{{"seed", 3}, {"norm", "comonotonic"}, {"node", "y"}, {"grid", "0:10:0.2"}, {"individuals", 10}};
  const json out = post(svc, "/curves", req);
  ASSERT_EQ(out["curves"].size(), 10u);
  ASSERT_EQ(out["grid"].size(), 51u);
  const auto& c = out["curves"];
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = 0; b < 10; ++b) {
      const bool below = c[a][0].get<double>() < c[b][0].get<double>();
      for (std::size_t g = 0; g < 51; ++g) ASSERT_EQ(c[a][g].get<double>() < c[b][g].get<double>(), below);
    }
}

TEST(Explorer, CurvesDegenerateShapes) {
  const auto svc = make_service({}, ExplorerLimits{100, 5});
  json req{{"seed", 3}, {"node", "y"}, {"grid", {2.0}}, {"individuals", 4}};
  const json one = post(svc, "/curves", req);
  ASSERT_EQ(one["curves"].size(), 4u);
  for (const auto& row : one["curves"]) EXPECT_EQ(row.size(), 1u);
  req["individuals"] = 0;
  EXPECT_EQ(post(svc, "/curves", req)["curves"], json::array());
  req["individuals"] = 11;
  req["grid"] = "0:9:1";
  EXPECT_EQ(post(svc, "/curves", req, 413)["error_code"], "RequestTooLarge");
  req["individuals"] = 2;
  req["parent"] = "y";
  EXPECT_EQ(post(svc, "/curves", req, 400)["error_code"], "UsageError");
  req.erase("parent");
  req["node"] = "x";
  EXPECT_EQ(post(svc, "/curves", req, 400)["error_code"], "NodeNotModeled");
}

TEST(Explorer, EffectCurve) {
  const auto svc = make_service();
  json req{{"seed", 1},       {"norm", "comonotonic"},  {"worlds", {"x=4", "x=4"}},
           {"node", "y"},     {"n", 500},               {"qs", {0.1, 0.5, 0.9}},
           {"replications", 3}};
  for (const auto& p : post(svc, "/effect-curve", req)["points"]) {
    EXPECT_LE(std::abs(p["effect"].get<double>()), 2 * p["std_error"].get<double>() + 1e-9);
  }
  req["worlds"] = {"x=4", "x=6"};
  std::vector<json> curves;
  for (const char* norm : {"comonotonic", "countermonotonic", "gaussian:2"}) {
    req["norm"] = norm;
    curves.push_back(post(svc, "/effect-curve", req)["points"]);
  }
  EXPECT_NE(curves[0], curves[1]);
  EXPECT_NE(curves[0], curves[2]);
  EXPECT_NE(curves[1], curves[2]);
  EXPECT_NEAR(curves[0][1]["effect"].get<double>(), 4.0, 0.3);
  req["norm"] = "gaussian:-1";
  EXPECT_EQ(post(svc, "/effect-curve", req, 400)["error_code"], "UsageError");
  req["norm"] = "comonotonic";
  req["replications"] = 50;
  EXPECT_EQ(post(svc, "/effect-curve", req, 413)["error_code"], "RequestTooLarge");
}

TEST(HttpServer, ServesJsonWithCors) {
  const auto svc = make_service();
  HttpServer server(svc, ServeOptions{"127.0.0.1", 0, "*"});
  const int port = server.bind();
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  httplib::Result res;
  for (int attempt = 0; attempt < 50 && !res; ++attempt) {
    res = client.Get("/model/info");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(json::parse(res->body)["d"], 2);
  const auto missing = client.Get("/elsewhere");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  const auto coupling = client.Post("/coupling", coupling_request("comonotonic", 10).dump(), "application/json");
  ASSERT_TRUE(coupling);
  EXPECT_EQ(coupling->status, 200);

  HttpServer clash(svc, ServeOptions{"127.0.0.1", port, "*"});
  try {
    clash.bind();
    ADD_FAILURE() << "second bind succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AddressInUse);
  }
  server.stop();
  loop.join();
}
