#include "meanmap/io.hpp"
#include "meanmap/random_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <unistd.h>

using namespace meanmap;
namespace rm = meanmap::random_models;
namespace fs = std::filesystem;

namespace {

ArtifactHeader header(const std::string& kind) { return {kind, "00112233aabbccdd", "ffeeddccbbaa9988"}; }

void expect_same_hmm(const Hmm& a, const Hmm& b) {
  EXPECT_EQ(a.initial, b.initial);
  EXPECT_EQ(a.transition, b.transition);
  ASSERT_EQ(a.is_discrete(), b.is_discrete());
  if (a.is_discrete()) {
    const auto& ea = std::get<DiscreteEmissions>(a.emissions);
    const auto& eb = std::get<DiscreteEmissions>(b.emissions);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i].probs, eb[i].probs);
  } else {
    const auto& ea = std::get<MixtureEmissions>(a.emissions);
    const auto& eb = std::get<MixtureEmissions>(b.emissions);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      EXPECT_EQ(ea[i].weights, eb[i].weights);
      for (std::size_t c = 0; c < ea[i].components.size(); ++c) {
        EXPECT_EQ(ea[i].components[c].mean, eb[i].components[c].mean);
        EXPECT_EQ(ea[i].components[c].cov, eb[i].components[c].cov);
      }
    }
  }
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(1);
  for (int c = 0; c < 2000; ++c) {
    const double v = rm::log_uniform(rng, 1e-300, 1e300) * (c % 2 ? -1 : 1);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  for (double v : {0.0, 1.0, 0.1, 5e-324, std::numeric_limits<double>::max()}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double("inf"), std::numeric_limits<double>::infinity());
  EXPECT_EQ(parse_double("-inf"), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(HmmFile, RoundTrip) {
  Rng rng(2);
  for (const Hmm& h : {rm::discrete_hmm(rng, 3, 4), rm::mixture_hmm(rng, 2, 2)}) {
    std::stringstream s;
    write_hmm(s, header("hmm"), h);
    ArtifactHeader back;
    const Hmm r = read_hmm(s, &back);
    EXPECT_EQ(back.config_hash, "00112233aabbccdd");
    EXPECT_EQ(back.source_hash, "ffeeddccbbaa9988");
    expect_same_hmm(h, r);
  }
}

TEST(HmmFile, RejectsMalformed) {
  std::stringstream empty("");
  EXPECT_THROW(read_hmm(empty), std::invalid_argument);
  Rng rng(3);
  std::stringstream s;
  write_hmm(s, header("hmm"), rm::discrete_hmm(rng, 2, 2));
  std::string text = s.str();
  text = text.substr(0, text.find("emission "));
  std::stringstream cut(text);
  EXPECT_THROW(read_hmm(cut), std::invalid_argument);
}

TEST(KdeFile, RoundTrip) {
  Rng rng(4);
  const KdeModel k = rm::kde(rng, 3);
  std::stringstream s;
  write_kde(s, header("kde"), k);
  const KdeModel r = read_kde(s);
  EXPECT_EQ(r.centers, k.centers);
  EXPECT_EQ(r.bandwidth, k.bandwidth);
}

TEST(GramFile, BitExactRoundTrip) {
  Rng rng(5);
  GramMatrix g;
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(5, 5);
  g.values = b * b.transpose() / 3.0;
  g.ids = {"a", "b", "c", "d", "e"};
  g.labels = {"0", "1", "0", "1", "1"};
  g.kernel = {"gmmk-hmm", {{"lambda", "0.1"}, {"T", "30"}}};
  std::stringstream s;
  write_gram(s, header("gram"), g, check_psd(g.values));
  const GramMatrix r = read_gram(s);
  EXPECT_EQ(r.values, g.values);
  EXPECT_EQ(r.ids, g.ids);
  EXPECT_EQ(r.labels, g.labels);
  EXPECT_EQ(r.kernel.kernel_id, "gmmk-hmm");
  EXPECT_EQ(r.kernel.params, g.kernel.params);
  EXPECT_EQ(gram_checksum(r.values), gram_checksum(g.values));
}

TEST(GramFile, ChecksumDetectsCorruption) {
  GramMatrix g;
  g.values = Eigen::MatrixXd::Identity(2, 2);
  g.ids = {"a", "b"};
  g.kernel = {"emmk", {}};
  std::stringstream s;
  write_gram(s, header("gram"), g, check_psd(g.values));
  std::string text = s.str();
  const auto pos = text.find("row 1 0");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, "row 1 1e-9");
  std::stringstream bad(text);
  EXPECT_THROW(read_gram(bad), std::invalid_argument);
}

TEST(Dataset, DiscreteLabeledWithComments) {
  const auto d = parse_dataset("# header\n0\t0 1 1 0\n1\t2 2 1\n\n", SequenceFormat::Discrete);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.labels[0], "0");
  EXPECT_EQ(d.labels[1], "1");
  EXPECT_EQ(std::get<SymbolSequence>(d.sequences[1]), (SymbolSequence{2, 2, 1}));
  EXPECT_EQ(d.alphabet, 3);
  EXPECT_TRUE(d.discrete);
  EXPECT_EQ(d.line_numbers[1], 3);
  const auto again = parse_dataset(format_dataset(d), SequenceFormat::Discrete);
  EXPECT_EQ(again.labels, d.labels);
  EXPECT_EQ(std::get<SymbolSequence>(again.sequences[0]), std::get<SymbolSequence>(d.sequences[0]));
}

TEST(Dataset, UnlabeledAndContinuous) {
  const auto d = parse_dataset("0 1 0\n1 1\n", SequenceFormat::Discrete);
  EXPECT_EQ(d.labels[0], "");
  const auto c = parse_dataset("a\t0.5 -1.25 3\n", SequenceFormat::Continuous);
  EXPECT_FALSE(c.discrete);
  const auto& x = std::get<VectorSequence>(c.sequences[0]);
  ASSERT_EQ(x.rows(), 3);
  EXPECT_EQ(x(1, 0), -1.25);
  const auto back = parse_dataset(format_dataset(c), SequenceFormat::Continuous);
  EXPECT_EQ(std::get<VectorSequence>(back.sequences[0]), x);
}

TEST(Dataset, Ucr) {
  const auto d = parse_dataset("1,0.1,0.2,0.3\n2, 0.5 ,0.4,0.3\n", SequenceFormat::Ucr);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.labels[1], "2");
  EXPECT_EQ(std::get<VectorSequence>(d.sequences[1])(0, 0), 0.5);
  const auto w = parse_dataset("1 0.1 0.2\n", SequenceFormat::Ucr);
  EXPECT_EQ(std::get<VectorSequence>(w.sequences[0]).rows(), 2);
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  try {
    parse_dataset("0 1\n0 x 1\n", SequenceFormat::Discrete);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_dataset("0 -1\n", SequenceFormat::Discrete), std::invalid_argument);
  EXPECT_THROW(parse_dataset("0\t\n", SequenceFormat::Discrete), std::invalid_argument);
  EXPECT_THROW(parse_dataset("", SequenceFormat::Discrete), std::invalid_argument);
  EXPECT_THROW(parse_format("binary"), std::invalid_argument);
  EXPECT_THROW(load_dataset("/nonexistent/file.txt", SequenceFormat::Discrete), std::invalid_argument);
}

TEST(FeatureTable, Parse) {
  const auto t = parse_feature_table("s1\tlow\t0.5 1.5\ns2\thigh\t-1 2\n");
  EXPECT_EQ(t.ids, (std::vector<std::string>{"s1", "s2"}));
  EXPECT_EQ(t.groups[1], "high");
  EXPECT_EQ(t.values(1, 0), -1.0);
  EXPECT_THROW(parse_feature_table("s1\tlow\t0.5 1.5\ns2\thigh\t-1\n"), std::invalid_argument);
}

TEST(Files, AtomicWriteAndHeader) {
  const fs::path dir = fs::temp_directory_path() / ("meanmap_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "m.hmm").string();
  Rng rng(6);
  std::stringstream s;
  write_hmm(s, header("hmm"), rm::discrete_hmm(rng, 2, 2));
  write_file_atomic(path, s.str());
  EXPECT_EQ(read_file(path), s.str());
  EXPECT_EQ(read_header(path).kind, "hmm");
  EXPECT_EQ(read_header(path).config_hash, "00112233aabbccdd");
  EXPECT_EQ(hash_file(path), fnv1a(s.str()));
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "m.hmm");
  fs::remove_all(dir);
}
