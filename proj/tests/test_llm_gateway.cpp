#include "ceval/common.hpp"
#include "ceval/llm_gateway.hpp"

#include "stub_server.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace ceval;
using namespace ceval::gateway;

namespace {

std::vector<prompt::PromptInstance> prompts(int n) {
  std::vector<prompt::PromptInstance> out;
  for (int i = 0; i < n; ++i) {
    prompt::EvalSample s{std::to_string(i), "kor", prompt::parse_task("offensive_detect"),
                         "sentence number " + std::to_string(i), "", ""};
    auto p = prompt::build_prompt(s, false, "");
    p.sample_ref = "ds/" + std::to_string(i);
    out.push_back(p);
  }
  return out;
}

EndpointConfig endpoint(const StubServer& server) {
  EndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_id = "llama-3.1-8b";
  cfg.adapter_tag = "kor-wvs";
  cfg.timeout_seconds = 5;
  cfg.retry_backoff_ms = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("llm_gateway") {

TEST_CASE("a cache hit issues no request") {
  StubServer server;
  GenerationCache cache;
  Gateway gw(endpoint(server), cache);
  const auto ps = prompts(1);
  const auto first = gw.generate(ps[0]);
  CHECK(first.raw_output == "### Answer: 1");
  CHECK(server.calls() == 1);
  const auto second = gw.generate(ps[0]);
  CHECK(server.calls() == 1);
  CHECK(gw.requests_issued() == 1);
  CHECK(second == first);
}

TEST_CASE("request body carries the adapter tag, greedy decoding and the bearer token") {
  StubServer server;
  GenerationCache cache;
  ::setenv("CEVAL_TEST_KEY", "sekret", 1);
  auto cfg = endpoint(server);
  cfg.api_key_env = "CEVAL_TEST_KEY";
  Gateway gw(cfg, cache);
  gw.generate(prompts(1)[0]);
  const auto body = nlohmann::json::parse(server.bodies().at(0));
  CHECK(body["model"] == "kor-wvs");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["max_tokens"] == 25);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == prompts(1)[0].text);
  CHECK(server.auth_headers().at(0) == "Bearer sekret");
  ::unsetenv("CEVAL_TEST_KEY");
}

TEST_CASE("at most max_parallel requests are in flight") {
  StubServer server({}, 40);
  GenerationCache cache;
  auto cfg = endpoint(server);
  cfg.max_parallel = 3;
  Gateway gw(cfg, cache);
  const auto ps = prompts(12);
  const auto result = gw.batch_generate(ps);
  CHECK(result.failures.empty());
  CHECK(server.calls() == 12);
  CHECK(server.peak_in_flight() <= 3);
  CHECK(server.peak_in_flight() >= 2);
  REQUIRE(result.slots.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(result.slots[i]->sample_ref == ps[i].sample_ref);
}

TEST_CASE("server errors and rate limits are retried") {
  StubServer server([](const nlohmann::json&, int call) -> std::pair<int, std::string> {
    if (call == 0) return {500, "{}"};
    if (call == 1) return {429, "{}"};
    return {200, StubServer::answer("### Answer: 2")};
  });
  GenerationCache cache;
  Gateway gw(endpoint(server), cache);
  CHECK(gw.generate(prompts(1)[0]).raw_output == "### Answer: 2");
  CHECK(server.calls() == 3);
}

TEST_CASE("client errors fail without retry; exhausted retries name the sample") {
  StubServer bad([](const nlohmann::json&, int) { return std::pair<int, std::string>{400, "{}"}; });
  GenerationCache cache;
  Gateway gw(endpoint(bad), cache);
  CHECK_THROWS_AS(gw.generate(prompts(1)[0]), TransportError);
  CHECK(bad.calls() == 1);

  StubServer down([](const nlohmann::json&, int) { return std::pair<int, std::string>{503, "{}"}; });
  auto cfg = endpoint(down);
  cfg.max_retries = 2;
  Gateway gw2(cfg, cache);
  try {
    gw2.generate(prompts(1)[0]);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.sample_ref() == "ds/0");
  }
  CHECK(down.calls() == 3);
}

TEST_CASE("an unexpected response shape is a schema error") {
  StubServer server([](const nlohmann::json&, int) { return std::pair<int, std::string>{200, "{\"nope\": 1}"}; });
  GenerationCache cache;
  Gateway gw(endpoint(server), cache);
  CHECK_THROWS_AS(gw.generate(prompts(1)[0]), SchemaError);
  StubServer text([](const nlohmann::json&, int) {
    return std::pair<int, std::string>{200, "{\"choices\": [{\"text\": \"### Answer: 2\"}]}"};
  });
  Gateway gw2(endpoint(text), cache);
  CHECK(gw2.generate(prompts(1)[0]).raw_output == "### Answer: 2");
}

TEST_CASE("lenient batches record failures, strict batches stop") {
  auto responder = [](const nlohmann::json& req, int) -> std::pair<int, std::string> {
    const auto content = req["messages"][0]["content"].get<std::string>();
    if (content.find("number 3") != std::string::npos) return {400, "{}"};
    return {200, StubServer::answer("### Answer: 1")};
  };
  {
    StubServer server(responder);
    GenerationCache cache;
    Gateway gw(endpoint(server), cache);
    const auto r = gw.batch_generate(prompts(6));
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].index == 3);
    CHECK(r.failures[0].kind == "transport");
    CHECK_FALSE(r.slots[3].has_value());
    CHECK(r.records().size() == 5);
  }
  {
    StubServer server(responder);
    GenerationCache cache;
    Gateway gw(endpoint(server), cache);
    CHECK_THROWS_AS(gw.batch_generate(prompts(6), true), TransportError);
    CHECK_THROWS_AS(gw.batch_generate({}), ValidationError);
  }
}

TEST_CASE("cache keys change with every component") {
  const prompt::DecodeParams d;
  const auto base = cache_key("h", "m", "a", d);
  CHECK(cache_key("h2", "m", "a", d) != base);
  CHECK(cache_key("h", "m2", "a", d) != base);
  CHECK(cache_key("h", "m", "a2", d) != base);
  prompt::DecodeParams d2;
  d2.max_new_tokens = 26;
  CHECK(cache_key("h", "m", "a", d2) != base);
  CHECK(cache_key("hm", "", "a", d) != cache_key("h", "m", "a", d));
  CHECK(base == cache_key("h", "m", "a", d));
}

TEST_CASE("the cache persists, skips corrupt lines and replays offline") {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  const auto ps = prompts(4);
  {
    StubServer server;
    GenerationCache cache(path);
    Gateway gw(endpoint(server), cache);
    gw.batch_generate(std::span(ps).first(3));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{ this is not json\n";
  }
  GenerationCache reloaded(path);
  CHECK(reloaded.size() == 3);
  CHECK(reloaded.corrupt_lines() == 1);

  const auto r = replay(path, ps, "llama-3.1-8b", "kor-wvs");
  CHECK(r.corrupt_lines == 1);
  REQUIRE(r.gaps.size() == 1);
  CHECK(r.gaps[0].index == 3);
  CHECK(r.gaps[0].sample_ref == "ds/3");
  CHECK(r.records().size() == 3);

  const auto other = replay(path, ps, "llama-3.1-8b", "eng-wvs");
  CHECK(other.gaps.size() == 4);

  CHECK_THROWS_AS(replay(dir / "missing.jsonl", ps, "m", "a"), IoError);
  write_file(dir / "junk.jsonl", "garbage\nmore garbage\n");
  CHECK_THROWS_AS(replay(dir / "junk.jsonl", ps, "m", "a"), ValidationError);
}

TEST_CASE("endpoint validation") {
  EndpointConfig cfg;
  cfg.model_id = "m";
  cfg.max_parallel = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.max_parallel = 1;
  cfg.timeout_seconds = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.timeout_seconds = 1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("records round-trip through JSON") {
  GenerationRecord r{std::string(64, 'a'), "ds/1", "m", "a", "### Answer: 1", {}, "2024-01-01T00:00:00Z"};
  CHECK(record_from_json(to_json(r)) == r);
  auto j = to_json(r);
  j["prompt_hash"] = "short";
  CHECK_THROWS(record_from_json(j));
}

TEST_CASE("embeddings are fetched in batches and kept in input order") {
  StubServer server;
  auto cfg = endpoint(server);
  cfg.model_id = "labse";
  EmbeddingClient client(cfg, 2);
  const std::vector<std::string> texts = {"a", "bb", "ccc", "dddd", "eeeee"};
  const auto v = client.embed(texts);
  REQUIRE(v.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(v[i][0] == static_cast<double>(i + 1));
    CHECK(v[i][1] == static_cast<double>(i % 2));
  }
  CHECK(client.requests_issued() == 3);
  CHECK(server.paths().at(0) == "/v1/embeddings");
  const auto body = nlohmann::json::parse(server.bodies().at(2));
  CHECK(body["model"] == "labse");
  CHECK(body["input"] == nlohmann::json::array({"eeeee"}));
}

TEST_CASE("embedding responses are reordered by index and checked for shape") {
  StubServer reversed([](const nlohmann::json& req, int) {
    const auto& input = req["input"];
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = input.size(); i-- > 0;) data.push_back({{"index", i}, {"embedding", {double(i)}}});
    return std::pair<int, std::string>{200, nlohmann::json{{"data", data}}.dump()};
  });
  EmbeddingClient client(endpoint(reversed));
  const std::vector<std::string> texts = {"x", "y", "z"};
  const auto v = client.embed(texts);
  CHECK(v == std::vector<std::vector<double>>{{0.0}, {1.0}, {2.0}});

  StubServer short_reply([](const nlohmann::json&, int) {
    return std::pair<int, std::string>{200, "{\"data\": [{\"index\": 0, \"embedding\": [1]}]}"};
  });
  EmbeddingClient bad(endpoint(short_reply));
  CHECK_THROWS_AS(bad.embed(texts), SchemaError);
  CHECK_THROWS_AS(EmbeddingClient(endpoint(short_reply), 0), ValidationError);
}

TEST_CASE("embedding inputs") {
  const auto in = parse_embedding_inputs("{\"culture\": \"kor\", \"source\": \"wiki\", \"text\": \"hi\"}\n\n");
  REQUIRE(in.size() == 1);
  CHECK(in[0].culture == "kor");
  CHECK_THROWS_AS(parse_embedding_inputs("{\"culture\": \"kor\"}"), ValidationError);
  CHECK_THROWS_AS(parse_embedding_inputs(""), ValidationError);
}

}
