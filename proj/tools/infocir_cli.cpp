// infocir command line: ingest, fit, query, enhance, explain, make-fixtures,
// accept, serve, serve-stub.
//
// Results go to stdout as JSON, diagnostics to stderr. Exit codes: 0 success,
// 1 user error, 2 internal error.

#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "infocir/acceptance.hpp"
#include "infocir/api_server.hpp"
#include "infocir/attribution.hpp"
#include "infocir/embedding_store.hpp"
#include "infocir/error.hpp"
#include "infocir/fixtures.hpp"
#include "infocir/http_provider.hpp"
#include "infocir/json_codec.hpp"
#include "infocir/projection.hpp"
#include "infocir/prompt_enhancer.hpp"
#include "infocir/retrieval.hpp"
#include "infocir/workbench.hpp"

using namespace infocir;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string corpus;
  std::string provider_url;
  std::string provider_token;
  std::uint64_t stub_seed = 0;
  std::uint64_t seed = 1;
  std::size_t k = 10;
  std::string grid = "7x7";
  std::string out;
  std::string data_dir = "infocir-data";
};

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

GridShape parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) fail(ErrorKind::kInvalidArgument, "grid must look like 7x7");
  try {
    const auto rows = std::stoul(s.substr(0, x));
    const auto cols = std::stoul(s.substr(x + 1));
    if (rows == 0 || cols == 0) throw std::invalid_argument("zero");
    return {rows, cols};
  } catch (const std::logic_error&) {
    fail(ErrorKind::kInvalidArgument, "grid must look like 7x7");
  }
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorKind::kInvalidArgument, std::string("missing ") + flag);
  return value;
}

EmbeddingCorpus load_corpus(const Globals& g) { return ingest_dir_or_manifest(require(g.corpus, "--corpus")); }

/// HTTP provider when --provider-url is set, else the stub with the corpus's
/// stub_catalog.json (an empty catalog when absent).
std::shared_ptr<Provider> make_provider(const Globals& g, std::size_t dim) {
  if (!g.provider_url.empty()) return std::make_shared<HttpProvider>(HttpProviderOptions{g.provider_url, g.provider_token});
  StubCatalog catalog;
  if (!g.corpus.empty()) {
    fs::path dir = g.corpus;
    if (!fs::is_directory(dir)) dir = dir.parent_path();
    if (fs::exists(dir / kStubCatalogName)) catalog = StubCatalog::load(dir / kStubCatalogName);
  }
  return std::make_shared<StubProvider>(std::move(catalog), dim, g.stub_seed);
}

fs::path default_model_path(const Globals& g) {
  fs::path dir = g.corpus;
  if (!fs::is_directory(dir)) dir = dir.parent_path();
  return dir / "projection.cirp";
}

int run_checked(const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    emit({{"error", e.what()}, {"kind", to_string(e.kind())}});
    return e.kind() == ErrorKind::kInternal ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    emit({{"error", e.what()}, {"kind", "internal"}});
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image retrieval analytics workbench"};
  app.set_config("--config", "", "TOML file with option values");
  app.fallthrough();
  app.require_subcommand(1, 1);

  Globals g;
  app.add_option("--corpus", g.corpus, "Corpus directory or manifest.json");
  app.add_option("--provider-url", g.provider_url, "Embedding provider base URL (stub when empty)");
  app.add_option("--provider-token", g.provider_token, "Bearer token for the provider");
  app.add_option("--stub-seed", g.stub_seed, "Seed of the built-in stub provider");
  app.add_option("--seed", g.seed, "Seed for fitting, fixtures and acceptance");
  app.add_option("--k", g.k, "Number of results");
  app.add_option("--grid", g.grid, "Saliency grid, e.g. 7x7");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--data-dir", g.data_dir, "Session directory for serve");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a manifest and write a normalized corpus");
  std::string manifest;
  ingest_cmd->add_option("manifest", manifest, "manifest.json or its directory")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the projection pipeline and report quality");
  ProjectionConfig pc;
  fit_cmd->add_option("--pca-keep", pc.pca_keep);
  fit_cmd->add_option("--lambda", pc.contrastive_lambda);
  fit_cmd->add_option("--ica-components", pc.ica_components);
  fit_cmd->add_option("--umap-neighbors", pc.umap_neighbors);
  fit_cmd->add_option("--umap-min-dist", pc.umap_min_dist);
  fit_cmd->add_option("--umap-epochs", pc.umap_epochs);

  // query / enhance / explain
  std::string reference, modifier, ideal;
  std::vector<std::string> ideals, manual;
  std::size_t n_variants = 5;
  auto* query_cmd = app.add_subcommand("query", "Rank the corpus for a composed query");
  query_cmd->add_option("--reference", reference, "Reference image id")->required();
  query_cmd->add_option("--modifier", modifier, "Text modifier");
  auto* enhance_cmd = app.add_subcommand("enhance", "Generate and evaluate prompt variants");
  enhance_cmd->add_option("--reference", reference)->required();
  enhance_cmd->add_option("--modifier", modifier)->required();
  enhance_cmd->add_option("--ideals", ideals, "Ideal image ids")->required()->delimiter(',');
  enhance_cmd->add_option("--n", n_variants, "Number of generated variants");
  enhance_cmd->add_option("--variant", manual, "Extra variant evaluated alongside generated ones");
  auto* explain_cmd = app.add_subcommand("explain", "Token and saliency attribution for one pair");
  explain_cmd->add_option("--reference", reference)->required();
  explain_cmd->add_option("--modifier", modifier)->required();
  explain_cmd->add_option("--ideal", ideal)->required();

  // fixtures / acceptance
  auto* fixtures_cmd = app.add_subcommand("make-fixtures", "Write the synthetic fixture corpora");
  auto* accept_cmd = app.add_subcommand("accept", "Run the acceptance suite against the stub provider");
  bool mutate_fisher = false;
  accept_cmd->add_flag("--mutate-fisher", mutate_fisher, "Run with a deliberately wrong Fisher routine");

  // servers
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_path, cors_origin = "*";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--model", model_path, "Projection model (fitted in the background when absent)");
  serve_cmd->add_option("--cors-origin", cors_origin);
  auto* stub_cmd = app.add_subcommand("serve-stub", "Serve the stub provider over the wire protocol");
  stub_cmd->add_option("--host", host);
  stub_cmd->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  return run_checked([&]() -> int {
    if (*ingest_cmd) {
      const auto corpus = ingest_dir_or_manifest(manifest);
      const fs::path out = require(g.out, "--out");
      write_corpus(corpus, out);
      emit({{"count", corpus.count()}, {"dim", corpus.dim()}, {"out", out.string()}});
      return 0;
    }
    if (*fit_cmd) {
      const auto corpus = load_corpus(g);
      pc.seed = g.seed;
      pc.validate();
      const auto model = fit_projection(corpus, pc);
      const fs::path out = g.out.empty() ? default_model_path(g) : fs::path(g.out);
      model.save(out);
      const auto q = quality_metrics(model, corpus);
      UmapOptions raw_opts;
      raw_opts.n_neighbors = pc.umap_neighbors;
      raw_opts.min_dist = pc.umap_min_dist;
      raw_opts.n_epochs = pc.umap_epochs;
      raw_opts.negative_sample_rate = pc.umap_negative_rate;
      raw_opts.seed = pc.seed;
      const double raw = knn_purity(umap_fit(corpus_matrix(corpus), raw_opts).layout, corpus_labels(corpus), 10);
      const json report = {{"model", out.string()},
                           {"points", corpus.count()},
                           {"pipeline_purity", q.knn_purity},
                           {"raw_umap_purity", raw},
                           {"trustworthiness", q.trustworthiness}};
      std::ofstream(fs::path(out).replace_extension(".quality.json")) << report.dump(2) << "\n";
      emit(report);
      return 0;
    }
    if (*query_cmd) {
      const auto corpus = load_corpus(g);
      const auto provider = make_provider(g, corpus.dim());
      RetrievalEngine engine(corpus, *provider);
      emit({{"ranked", engine.top_k({Reference::image(reference), modifier, g.k})}});
      return 0;
    }
    if (*enhance_cmd) {
      const auto corpus = load_corpus(g);
      const auto provider = make_provider(g, corpus.dim());
      RetrievalEngine engine(corpus, *provider);
      EnhancementRequest req;
      req.n_variants = n_variants;
      req.ideals = IdealAnchorSet::make(corpus, ideals);
      req.baseline = {Reference::image(reference), modifier, g.k};
      req.manual_variants = manual;
      const LlmClient llm(LlmConfig::from_env());
      emit(json(enhance(engine, req, &llm)));
      return 0;
    }
    if (*explain_cmd) {
      const auto corpus = load_corpus(g);
      const auto provider = make_provider(g, corpus.dim());
      AttributionEngine engine(corpus, *provider);
      emit(json(engine.explain_pair(Reference::image(reference), modifier, ideal, parse_grid(g.grid))));
      return 0;
    }
    if (*fixtures_cmd) {
      const fs::path out = require(g.out, "--out");
      make_fixtures(out, g.seed);
      emit({{"out", out.string()}, {"seed", g.seed}, {"fixtures", {"style", "apple", "terrier", "ica"}}});
      return 0;
    }
    if (*accept_cmd) {
      AcceptanceOptions opts;
      opts.seed = g.seed;
      if (mutate_fisher) opts.fisher = perturbed_fisher;
      const auto report = run_acceptance(opts);
      for (const auto& c : report.criteria) std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
      const std::string text = report.to_json().dump(2) + "\n";
      if (!g.out.empty()) std::ofstream(g.out, std::ios::binary) << text;
      std::cout << text;
      return report.passed() ? 0 : 1;
    }
    if (*serve_cmd) {
      auto corpus = std::make_shared<const EmbeddingCorpus>(load_corpus(g));
      auto provider = make_provider(g, corpus->dim());
      std::shared_ptr<const ProjectionModel> model;
      if (!model_path.empty()) model = std::make_shared<const ProjectionModel>(ProjectionModel::load(model_path));
      WorkbenchOptions wopts;
      wopts.data_dir = g.data_dir;
      wopts.llm = LlmConfig::from_env();
      Workbench wb(corpus, provider, model, wopts);
      if (!model) {
        ProjectionConfig cfg;
        cfg.seed = g.seed;
        wb.start_fit(cfg);
      }
      ApiServerOptions aopts;
      aopts.cors_origin = cors_origin;
      ApiServer server(wb, aopts);
      std::cerr << "serving on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) fail(ErrorKind::kIo, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
    if (*stub_cmd) {
      StubCatalog catalog;
      if (!g.corpus.empty()) {
        fs::path dir = g.corpus;
        if (!fs::is_directory(dir)) dir = dir.parent_path();
        if (fs::exists(dir / kStubCatalogName)) catalog = StubCatalog::load(dir / kStubCatalogName);
      }
      StubProvider stub(std::move(catalog), kStubDefaultDim, g.stub_seed);
      ProviderServer server(stub, g.provider_token);
      std::cerr << "stub provider on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) fail(ErrorKind::kIo, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
    return 1;
  });
}
