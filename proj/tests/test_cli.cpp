#include "meanmap/gmmk_hmm.hpp"
#include "meanmap/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace meanmap;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" MEANMAP_CLI "' " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("meanmap_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

std::string four_line_dataset() {
  return "0\t0 1 2 3 0 1 2 3 1 1 0 2\n"
         "0\t0 0 1 2 3 3 2 1 0 0 1 2\n"
         "1\t3 3 2 2 1 1 0 0 3 2 1 0\n"
         "1\t2 3 2 3 1 0 1 0 2 3 2 3\n";
}

}  // namespace

TEST_F(Cli, FitHmmsOneFilePerSequenceAndResumes) {
  write(dir / "d.txt", four_line_dataset());
  const auto first = run(dir, "fit-hmms --data d.txt --states 2 --out models");
  ASSERT_EQ(first.code, 0) << first.output;
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "models")) files += e.path().extension() == ".hmm";
  EXPECT_EQ(files, 4);
  const auto stamp = fs::last_write_time(dir / "models" / "x0002.hmm");
  const auto second = run(dir, "fit-hmms --data d.txt --states 2 --out models");
  ASSERT_EQ(second.code, 0);
  EXPECT_NE(second.output.find("0 fitted, 4 up to date"), std::string::npos) << second.output;
  EXPECT_EQ(fs::last_write_time(dir / "models" / "x0002.hmm"), stamp);
}

TEST_F(Cli, FitHmmsHeuristicStateCount) {
  std::string line = "0\t";
  for (int t = 0; t < 100; ++t) line += std::to_string((t * 7 + t / 3) % 4) + (t < 99 ? " " : "\n");
  write(dir / "d.txt", line + line);
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states heuristic --out m").code, 0);
  std::ifstream in(dir / "m" / "x0000.hmm");
  const Hmm h = read_hmm(in);
  EXPECT_EQ(h.states(), 3);
}

TEST_F(Cli, FitHmmsPerClass) {
  write(dir / "d.txt", four_line_dataset());
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states 2 --per-class --out m").code, 0);
  EXPECT_TRUE(fs::exists(dir / "m" / "class-0.hmm"));
  EXPECT_TRUE(fs::exists(dir / "m" / "class-1.hmm"));
}

TEST_F(Cli, GramShapesAndBitExactReload) {
  write(dir / "d.txt", "0\t0 1 1 0 1 0 0 1\n1\t1 1 1 0 1 1 1 1\n");
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states 2 --out m").code, 0);
  const auto g = run(dir, "gram --models m --kernel gmmk-hmm --lambda 0.5 --witness-T 7 --out g.txt");
  ASSERT_EQ(g.code, 0) << g.output;
  std::ifstream in(dir / "g.txt");
  const GramMatrix gram = read_gram(in);
  ASSERT_EQ(gram.size(), 2);
  std::vector<Hmm> models;
  for (const char* f : {"x0000.hmm", "x0001.hmm"}) {
    std::ifstream m(dir / "m" / f);
    models.push_back(read_hmm(m));
  }
  GmmkHmmConfig cfg;
  cfg.witness_length = 7;
  cfg.rbf = RbfParams(0.5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const auto& a = models[static_cast<std::size_t>(std::min(i, j))];
      const auto& b = models[static_cast<std::size_t>(std::max(i, j))];
      EXPECT_EQ(gram.values(i, j), gmmk_hmm(a, b, cfg).value);
    }
}

TEST_F(Cli, IdenticalModelsGiveConstantGram) {
  write(dir / "d.txt", "0\t0 1 1 0 1 0 0 1\n1\t0 1 1 0 1 0 0 1\n");
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states 2 --out m").code, 0);
  ASSERT_EQ(run(dir, "gram --models m --kernel ppk --out g.txt").code, 0);
  std::ifstream in(dir / "g.txt");
  const GramMatrix gram = read_gram(in);
  EXPECT_EQ(gram.values.maxCoeff(), gram.values.minCoeff());
}

TEST_F(Cli, MixedConfigurationsRefused) {
  write(dir / "d.txt", four_line_dataset());
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states 2 --out m").code, 0);
  ASSERT_EQ(run(dir, "fit-hmms --data d.txt --states 3 --out other").code, 0);
  fs::copy_file(dir / "other" / "x0001.hmm", dir / "m" / "x0001.hmm", fs::copy_options::overwrite_existing);
  const auto r = run(dir, "gram --models m --kernel gmmk-hmm --out g.txt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("mixed configurations"), std::string::npos) << r.output;
}

TEST_F(Cli, ClassifyReportRows) {
  write(dir / "d.txt", four_line_dataset() + four_line_dataset());
  const auto r = run(dir,
                     "classify --data d.txt --kernel emmk --lambda 0.1 1 --C 0.1 1 10 --folds 2 "
                     "--out report.tsv");
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(dir / "report.tsv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("fold_row ", 0) != 0) continue;
    ++rows;
    std::istringstream fields(line.substr(9));
    std::string point;
    int fold, test_size;
    double error, kkt;
    fields >> point >> fold >> test_size >> error >> kkt;
    EXPECT_GE(kkt, 0.0) << line;
    EXPECT_LE(kkt, 1e-3) << line;
  }
  EXPECT_EQ(rows, 2 * 2 * 3);
}

TEST_F(Cli, ExitCodes) {
  write(dir / "d.txt", four_line_dataset());
  EXPECT_EQ(run(dir, "fit-hmms --data missing.txt --out m").code, 2);
  EXPECT_EQ(run(dir, "fit-hmms --data d.txt --states zero --out m").code, 2);
  EXPECT_EQ(run(dir, "gram --data d.txt --kernel nope --out g.txt").code, 2);
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
  EXPECT_EQ(run(dir, "classify --data d.txt --kernel emmk --bogus").code, 2);
  write(dir / "theta.hmm",
        "meanmap hmm\nconfig_hash 0\nsource_hash 0\nemissions discrete\nstates 1\nobservation_size 4\n"
        "initial 1\ntransition 1\nemission 1 0 0 0\nend\n");
  const auto r = run(dir, "gram --data d.txt --kernel lmmk --theta theta.hmm --out g.txt");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_TRUE(fs::exists(dir / "g.txt.diagnostic"));
  EXPECT_FALSE(fs::exists(dir / "g.txt"));
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(run(dir, "synth --per-class 5 --length 20 --seed 4 --out a.txt").code, 0);
  ASSERT_EQ(run(dir, "synth --per-class 5 --length 20 --seed 4 --out b.txt").code, 0);
  ASSERT_EQ(run(dir, "synth --per-class 5 --length 20 --seed 5 --out c.txt").code, 0);
  EXPECT_EQ(read_file((dir / "a.txt").string()), read_file((dir / "b.txt").string()));
  EXPECT_NE(read_file((dir / "a.txt").string()), read_file((dir / "c.txt").string()));
  const auto d = load_dataset((dir / "a.txt").string(), SequenceFormat::Discrete);
  EXPECT_EQ(d.size(), 10u);
}

TEST_F(Cli, KdeFitGramKpcaPipeline) {
  std::string table;
  for (int i = 0; i < 12; ++i) {
    const double jitter = 0.1 * ((i * 37) % 11 - 5) / 5.0;
    table += "a" + std::to_string(i) + "\tleft\t" + std::to_string(-3 + jitter) + " " + std::to_string(jitter) + "\n";
    table += "b" + std::to_string(i) + "\tright\t" + std::to_string(3 - jitter) + " " + std::to_string(-jitter) + "\n";
  }
  write(dir / "t.tsv", table);
  ASSERT_EQ(run(dir, "kde-fit --table t.tsv --out kdes").code, 0);
  ASSERT_EQ(run(dir, "gram --models kdes --kernel gmmk-kde --lambda 0.1 --out g.txt").code, 0);
  const auto r = run(dir, "kpca --gram g.txt --components 1 --out pcs.tsv");
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string pcs = read_file((dir / "pcs.tsv").string());
  EXPECT_NE(pcs.find("left"), std::string::npos);
  EXPECT_NE(pcs.find("# eigenvalues"), std::string::npos);
}
