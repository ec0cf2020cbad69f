#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxlm/cli.hpp"
#include "ctxlm/util.hpp"

using namespace ctxlm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ctxlm");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "ctxlm_cli_tests" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// Small corpus and training flags shared by the tests below.
const fs::path& corpus() {
  static const fs::path path = [] {
    const fs::path dir = scratch("corpus");
    const Run r = cli({"generate", "--seed", "3", "--utterances", "3000", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    return dir / "corpus.txt";
  }();
  return path;
}

std::vector<std::string> train_args(const fs::path& out, std::vector<std::string> extra) {
  std::vector<std::string> a = {"train",        "--corpus",     corpus().string(), "--out-dir", out.string(),
                                "--steps",      "30",           "--eval-every",    "15",        "--embed-dim",
                                "8",            "--hidden-dim", "8",               "--context-dim", "8",
                                "--batch-size", "16",           "--seed",          "5"};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"train", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  const fs::path out = scratch("usage");
  CHECK(cli({"train", "--corpus", corpus().string(), "--arch", "prepend", "--attention", "word", "--out-dir",
             out.string()})
            .code == kExitUsage);
  CHECK(cli({"train", "--corpus", corpus().string(), "--arch", "sideways", "--out-dir", out.string()}).code ==
        kExitUsage);
  CHECK(cli({"train", "--out-dir", out.string()}).code == kExitUsage);
  const Run missing = cli({"train", "--corpus", (out / "nope.txt").string(), "--out-dir", out.string()});
  CHECK(missing.code != kExitOk);
  CHECK(missing.err.find("error") != std::string::npos);
}

TEST_CASE("cli generate is deterministic") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const Run ra = cli({"generate", "--seed", "9", "--utterances", "800", "--out-dir", a.string()});
  const Run rb = cli({"generate", "--seed", "9", "--utterances", "800", "--out-dir", b.string()});
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a / "corpus.txt") == slurp(b / "corpus.txt"));
  CHECK(split_lines(ra.out)[0] == "utterances 800");
  CHECK(ra.out.find("split train=720 dev=40 test=40") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest.at("command") == "generate");
  CHECK(ra.out.find("corpus hash " + manifest.at("corpus_hash").get<std::string>()) != std::string::npos);
  CHECK(manifest.at("artifacts").at("corpus").at("hash") == file_hash((a / "corpus.txt").string()));
}

TEST_CASE("cli train, eval, sweep and trace") {
  const fs::path base = scratch("train_default"), ctx = scratch("train_concat");
  const Run rb = cli(train_args(base, {}));
  REQUIRE(rb.code == 0);
  const Run rc = cli(train_args(ctx, {"--arch", "concat", "--attention", "word"}));
  REQUIRE(rc.code == 0);
  for (const char* f : {"model.ckpt", "loss.csv", "report.json", "report.txt", "manifest.json"})
    CHECK(fs::exists(ctx / f));
  CHECK(rc.out.find("full ppl") != std::string::npos);
  CHECK(split_lines(slurp(ctx / "loss.csv")).size() == 1 + 2);

  // a model evaluated against its own report reduces nothing
  const fs::path ev = scratch("eval");
  const Run re = cli({"eval", "--checkpoint", (ctx / "model.ckpt").string(), "--corpus", corpus().string(),
                      "--baseline", (ctx / "report.json").string(), "--out-dir", ev.string()});
  REQUIRE(re.code == 0);
  const auto doc = nlohmann::json::parse(slurp(ev / "eval.json"));
  const auto report = nlohmann::json::parse(slurp(ctx / "report.json"));
  CHECK(doc.dump().find("relative_reduction") != std::string::npos);
  CHECK(re.out.find("0.00") != std::string::npos);
  CHECK(doc.dump().find(report.at("partitions").at("full").at("perplexity").dump()) != std::string::npos);

  const fs::path sw = scratch("sweep");
  const Run rs = cli({"sweep", "--checkpoint", (ctx / "model.ckpt").string(), "--baseline",
                      (base / "model.ckpt").string(), "--word", "snooze", "--out-dir", sw.string()});
  REQUIRE(rs.code == 0);
  const auto rows = split_lines(slurp(sw / "sweep.csv"));
  REQUIRE(rows.size() == 25);
  CHECK(rows[0] == "hour,probability,baseline");
  const std::string first_base = rows[1].substr(rows[1].rfind(',') + 1);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].rfind(',') + 1) == first_base);
  CHECK(rs.out.find("argmax hour = ") != std::string::npos);
  CHECK(cli({"sweep", "--checkpoint", (ctx / "model.ckpt").string(), "--word", "xylophone-zz", "--out-dir",
             sw.string()})
            .code == kExitUsage);

  const fs::path tr = scratch("trace");
  const Run rt = cli({"trace", "--checkpoint", (ctx / "model.ckpt").string(), "--text",
                      "play me best christmas songs", "--time", "2020-12-23 07:00", "--out-dir", tr.string()});
  REQUIRE(rt.code == 0);
  const auto trace = split_lines(slurp(tr / "trace.csv"));
  CHECK(trace.size() == 1 + 6 * 4);
  CHECK(cli({"trace", "--checkpoint", (base / "model.ckpt").string(), "--text", "play", "--out-dir", tr.string()})
            .code == kExitUsage);

  const fs::path ab = scratch("ablate");
  CHECK(cli({"ablate", "--corpus", corpus().string(), "--arch", "default", "--out-dir", ab.string()}).code ==
        kExitUsage);
}

TEST_CASE("cli rerun from a manifest reproduces the checkpoint") {
  const fs::path first = scratch("rerun_a"), second = scratch("rerun_b");
  REQUIRE(cli(train_args(first, {"--arch", "factor", "--rank", "2"})).code == 0);
  REQUIRE(cli({"train", "--config", (first / "manifest.json").string(), "--out-dir", second.string()}).code == 0);
  CHECK(file_hash((first / "model.ckpt").string()) == file_hash((second / "model.ckpt").string()));
  CHECK(slurp(first / "report.json") == slurp(second / "report.json"));
}

TEST_CASE("cli ci runs in parallel and matches serial") {
  const fs::path serial = scratch("ci_serial"), parallel = scratch("ci_parallel");
  std::vector<std::string> common = {"ci",    "--corpus", corpus().string(), "--steps", "10", "--eval-every", "10",
                                     "--embed-dim", "8", "--hidden-dim", "8", "--runs", "3", "--arch", "concat",
                                     "--context-dim", "8"};
  auto a = common, b = common;
  a.insert(a.end(), {"--out-dir", serial.string()});
  b.insert(b.end(), {"--out-dir", parallel.string(), "--jobs", "3"});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(serial / "ci.json") == slurp(parallel / "ci.json"));
  CHECK(cli({"ci", "--corpus", corpus().string(), "--runs", "1", "--out-dir", serial.string()}).code == kExitUsage);
}
