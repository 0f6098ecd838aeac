#include <gtest/gtest.h>

#include "infocir/error.hpp"
#include "infocir/http_provider.hpp"
#include "json.hpp"
#include "test_support.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with Eigen.
#include "httplib.h"

using namespace infocir;

namespace {

StubCatalog catalog() {
  StubCatalog c;
  c.grid = {3, 3};
  c.images["a"] = {{"green", "apple"}, {{0, 0}, {2, 2}}};
  c.images["b"] = {{"dog"}, {{1, 1}}};
  return c;
}

// Stub with the two gradient capabilities switched on; scores are fixed
// functions of the inputs so the client can check what crossed the wire.
class GradientStub : public StubProvider {
 public:
  using StubProvider::StubProvider;
  ProviderInfo info() const override {
    auto i = StubProvider::info();
    i.capabilities.insert(kCapTokenGradients);
    i.capabilities.insert(kCapGradientSaliency);
    return i;
  }
  TokenGradients token_gradients(const Reference&, const std::string& modifier,
                                 std::span<const float> target) const override {
    TokenGradients g;
    double k = 1.0;
    for (const auto& w : testing_support::ref_words(modifier)) {
      g.tokens.push_back(w);
      g.scores.push_back(k * target[0]);
      k += 1.0;
    }
    return g;
  }
  Grid gradient_saliency(const std::string&, std::span<const float> query, GridShape grid) const override {
    Grid g(grid.rows, std::vector<double>(grid.cols));
    for (std::size_t r = 0; r < grid.rows; ++r)
      for (std::size_t c = 0; c < grid.cols; ++c) g[r][c] = double(r * grid.cols + c) * query[1];
    return g;
  }
};

struct Served {
  explicit Served(const Provider& p, std::string token = {}) : server(p, std::move(token)) {
    port = server.start("127.0.0.1", 0);
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
  ProviderServer server;
  int port = 0;
};

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

}  // namespace

TEST(ProviderProtocol, VectorsAreBitExactOverTheWire) {
  const StubProvider stub(catalog(), 64, 3);
  Served s(stub);
  const HttpProvider http({s.url()});
  EXPECT_EQ(http.info(), stub.info());
  EXPECT_EQ(http.embed_text("Green apples"), stub.embed_text("Green apples"));
  EXPECT_EQ(http.embed_image("a"), stub.embed_image("a"));
  const OcclusionMask mask{{3, 3}, {{0, 0}}};
  EXPECT_EQ(http.embed_image_masked("a", mask), stub.embed_image_masked("a", mask));
  EXPECT_EQ(http.compose(Reference::image("a"), "red"), stub.compose(Reference::image("a"), "red"));
  const auto v = stub.embed_text("dog");
  EXPECT_EQ(http.compose(Reference::vector(v), "on grass"), stub.compose(Reference::vector(v), "on grass"));
  EXPECT_EQ(http.compose(Reference::vector(v), ""), v);
}

TEST(ProviderProtocol, UrlPrefixIsKept) {
  const StubProvider stub(catalog(), 16);
  httplib::Server proxy;
  Served s(stub);
  const int upstream = s.port;
  proxy.Post(R"(/prefix/(v1/.*))", [upstream](const httplib::Request& req, httplib::Response& res) {
    httplib::Client c("127.0.0.1", upstream);
    auto r = c.Post("/" + std::string(req.matches[1]), req.body, "application/json");
    res.status = r->status;
    res.set_content(r->body, "application/json");
  });
  proxy.Get(R"(/prefix/(v1/.*))", [upstream](const httplib::Request& req, httplib::Response& res) {
    httplib::Client c("127.0.0.1", upstream);
    auto r = c.Get("/" + std::string(req.matches[1]));
    res.status = r->status;
    res.set_content(r->body, "application/json");
  });
  const int port = proxy.bind_to_any_port("127.0.0.1");
  std::thread t([&] { proxy.listen_after_bind(); });
  proxy.wait_until_ready();
  const HttpProvider http({"http://127.0.0.1:" + std::to_string(port) + "/prefix"});
  EXPECT_EQ(http.embed_text("x"), stub.embed_text("x"));
  proxy.stop();
  t.join();
}

TEST(ProviderProtocol, ErrorsMapToKinds) {
  const StubProvider stub(catalog(), 16);
  Served s(stub);
  const HttpProvider http({s.url()});
  EXPECT_EQ(kind_of([&] { http.embed_image("missing"); }), ErrorKind::kNotFound);
  EXPECT_EQ(kind_of([&] { http.embed_image_masked("b", {{3, 3}, {{1, 1}}}); }), ErrorKind::kInvalidArgument);

  httplib::Client raw("127.0.0.1", s.port);
  auto res = raw.Post("/v1/embed_image", R"({"ref":"missing"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_TRUE(nlohmann::json::parse(res->body).contains("error"));
  res = raw.Post("/v1/embed_text", "{oops", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(ProviderProtocol, AbsentCapabilityIsReportedWithoutARequest) {
  const StubProvider stub(catalog(), 16);
  Served s(stub);
  const HttpProvider http({s.url()});
  try {
    http.token_gradients(Reference::image("a"), "red", stub.embed_text("red"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    EXPECT_NE(std::string(e.what()).find("capability absent: token_gradients"), std::string::npos);
  }
  EXPECT_THROW(http.gradient_saliency("a", stub.embed_text("red"), {3, 3}), Error);
}

TEST(ProviderProtocol, GradientEndpointsRoundTrip) {
  const GradientStub stub(catalog(), 16);
  Served s(stub);
  const HttpProvider http({s.url()});
  const auto target = stub.embed_text("apple");
  const auto g = http.token_gradients(Reference::image("a"), "Red ripe", target);
  EXPECT_EQ(g.tokens, (std::vector<std::string>{"red", "ripe"}));
  ASSERT_EQ(g.scores.size(), 2u);
  EXPECT_DOUBLE_EQ(g.scores[1], 2.0 * target[0]);
  const auto grid = http.gradient_saliency("a", target, {2, 3});
  ASSERT_EQ(grid.size(), 2u);
  ASSERT_EQ(grid[0].size(), 3u);
  EXPECT_DOUBLE_EQ(grid[1][2], 5.0 * target[1]);
}

TEST(ProviderProtocol, BearerTokenIsRequired) {
  const StubProvider stub(catalog(), 16);
  Served s(stub, "secret");
  EXPECT_EQ(kind_of([&] { HttpProvider({s.url()}).info(); }), ErrorKind::kProvider);
  EXPECT_EQ(kind_of([&] { HttpProvider({s.url(), "wrong"}).embed_text("x"); }), ErrorKind::kProvider);
  EXPECT_EQ(HttpProvider({s.url(), "secret"}).embed_text("x"), stub.embed_text("x"));
}

TEST(ProviderProtocol, UnreachableProviderIsProviderError) {
  int port = 0;
  {
    const StubProvider stub(catalog(), 16);
    Served s(stub);
    port = s.port;
  }
  HttpProviderOptions opts{"http://127.0.0.1:" + std::to_string(port)};
  opts.timeout_seconds = 2;
  EXPECT_EQ(kind_of([&] { HttpProvider(opts).info(); }), ErrorKind::kProvider);
}

TEST(ProviderProtocol, WrongDimensionResponseIsRejected) {
  httplib::Server fake;
  fake.Get("/v1/info", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"name":"fake","dim":4,"capabilities":[]})", "application/json");
  });
  fake.Post("/v1/embed_text", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"vector":[1,0,0]})", "application/json");
  });
  const int port = fake.bind_to_any_port("127.0.0.1");
  std::thread t([&] { fake.listen_after_bind(); });
  fake.wait_until_ready();
  const HttpProvider http({"http://127.0.0.1:" + std::to_string(port)});
  EXPECT_EQ(http.info().dim, 4u);
  EXPECT_EQ(kind_of([&] { http.embed_text("x"); }), ErrorKind::kProvider);
  fake.stop();
  t.join();
}
