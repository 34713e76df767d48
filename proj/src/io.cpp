#include "meanmap/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace meanmap {
namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

void require_token(const std::string& s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      throw std::invalid_argument(std::string(what) + " '" + s + "' contains whitespace");
    }
  }
}

// Reads whitespace-tokenized lines and checks their leading keyword.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      auto tok = split_ws(line);
      if (!tok.empty()) return tok;
    }
    throw std::invalid_argument("unexpected end of file after line " + std::to_string(line_no_));
  }

  std::vector<std::string> expect(const std::string& key, std::size_t min_values = 0) {
    auto tok = next();
    if (tok[0] != key) {
      throw std::invalid_argument("line " + std::to_string(line_no_) + ": expected '" + key +
                                  "', found '" + tok[0] + "'");
    }
    if (tok.size() < 1 + min_values) {
      throw std::invalid_argument("line " + std::to_string(line_no_) + ": '" + key +
                                  "' is missing values");
    }
    return tok;
  }

  Eigen::VectorXd expect_vector(const std::string& key, long size) {
    const auto tok = expect(key);
    if (static_cast<long>(tok.size()) != size + 1) {
      throw std::invalid_argument("line " + std::to_string(line_no_) + ": '" + key +
                                  "' needs " + std::to_string(size) + " values");
    }
    Eigen::VectorXd v(size);
    for (long i = 0; i < size; ++i) v[i] = parse_double(tok[static_cast<std::size_t>(i) + 1]);
    return v;
  }

  long expect_long(const std::string& key) {
    const auto tok = expect(key, 1);
    long v = 0;
    const auto res = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), v);
    if (res.ec != std::errc() || res.ptr != tok[1].data() + tok[1].size()) {
      throw std::invalid_argument("line " + std::to_string(line_no_) + ": bad integer '" +
                                  tok[1] + "'");
    }
    return v;
  }

  long line() const { return line_no_; }

 private:
  std::istream& in_;
  long line_no_ = 0;
};

void write_row(std::ostream& out, const char* key, const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  out << key;
  for (long i = 0; i < v.size(); ++i) out << ' ' << format_double(v[i]);
  out << '\n';
}

void write_header(std::ostream& out, const ArtifactHeader& h) {
  require_token(h.kind, "artifact kind");
  out << "meanmap " << h.kind << '\n';
  out << "config_hash " << (h.config_hash.empty() ? "-" : h.config_hash) << '\n';
  out << "source_hash " << (h.source_hash.empty() ? "-" : h.source_hash) << '\n';
}

ArtifactHeader parse_header(LineReader& r, const std::string& kind) {
  ArtifactHeader h;
  h.kind = r.expect("meanmap", 1)[1];
  if (!kind.empty() && h.kind != kind) {
    throw std::invalid_argument("expected a '" + kind + "' artifact, found '" + h.kind + "'");
  }
  h.config_hash = r.expect("config_hash", 1)[1];
  h.source_hash = r.expect("source_hash", 1)[1];
  return h;
}

std::string label_or_dash(const std::string& s) { return s.empty() ? "-" : s; }
std::string dash_to_empty(const std::string& s) { return s == "-" ? "" : s; }

std::string make_id(std::size_t i, std::size_t total) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(total).size());
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "x" + digits;
}

std::string normalize_label(const std::string& s) {
  // "1.0000000e+00" and "1" name the same UCR class.
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v)) {
    return format_double(v);
  }
  return s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (text == "inf" || text == "+inf" || text == "Inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf" || text == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* begin = text.data();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto res = std::from_chars(begin, text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_file(const std::string& path) { return fnv1a(read_file(path)); }

void write_hmm(std::ostream& out, const ArtifactHeader& header, const Hmm& hmm) {
  require_valid(validate(hmm), "hmm");
  write_header(out, header);
  const int n = hmm.states();
  out << "emissions " << (hmm.is_discrete() ? "discrete" : "mixture") << '\n';
  out << "states " << n << '\n';
  out << "observation_size " << hmm.observation_size() << '\n';
  write_row(out, "initial", hmm.initial.transpose());
  for (int i = 0; i < n; ++i) write_row(out, "transition", hmm.transition.row(i));
  if (hmm.is_discrete()) {
    for (const auto& e : std::get<DiscreteEmissions>(hmm.emissions)) {
      write_row(out, "emission", e.probs.transpose());
    }
  } else {
    for (const auto& m : std::get<MixtureEmissions>(hmm.emissions)) {
      out << "mixture " << m.components.size() << '\n';
      for (std::size_t c = 0; c < m.components.size(); ++c) {
        out << "weight " << format_double(m.weights[static_cast<long>(c)]) << '\n';
        write_row(out, "mean", m.components[c].mean.transpose());
        for (long r = 0; r < m.components[c].cov.rows(); ++r) {
          write_row(out, "cov", m.components[c].cov.row(r));
        }
      }
    }
  }
  out << "end\n";
}

Hmm read_hmm(std::istream& in, ArtifactHeader* header) {
  LineReader r(in);
  const ArtifactHeader h = parse_header(r, "hmm");
  if (header) *header = h;
  const std::string kind = r.expect("emissions", 1)[1];
  const long n = r.expect_long("states");
  const long k = r.expect_long("observation_size");
  if (n < 1 || k < 1) throw std::invalid_argument("hmm: sizes must be positive");
  Hmm hmm;
  hmm.initial = r.expect_vector("initial", n);
  hmm.transition.resize(n, n);
  for (long i = 0; i < n; ++i) hmm.transition.row(i) = r.expect_vector("transition", n).transpose();
  if (kind == "discrete") {
    DiscreteEmissions em;
    for (long i = 0; i < n; ++i) em.push_back(DiscreteDist{r.expect_vector("emission", k)});
    hmm.emissions = std::move(em);
  } else if (kind == "mixture") {
    MixtureEmissions em;
    for (long i = 0; i < n; ++i) {
      const long m = r.expect_long("mixture");
      if (m < 1) throw std::invalid_argument("hmm: mixture needs at least one component");
      GaussianMixture mix;
      mix.weights.resize(m);
      for (long c = 0; c < m; ++c) {
        mix.weights[c] = parse_double(r.expect("weight", 1)[1]);
        GaussianDist g;
        g.mean = r.expect_vector("mean", k);
        g.cov.resize(k, k);
        for (long row = 0; row < k; ++row) g.cov.row(row) = r.expect_vector("cov", k).transpose();
        mix.components.push_back(std::move(g));
      }
      em.push_back(std::move(mix));
    }
    hmm.emissions = std::move(em);
  } else {
    throw std::invalid_argument("hmm: unknown emission kind '" + kind + "'");
  }
  r.expect("end");
  require_valid(validate(hmm), "hmm");
  return hmm;
}

void write_kde(std::ostream& out, const ArtifactHeader& header, const KdeModel& kde) {
  require_valid(validate(kde), "kde");
  write_header(out, header);
  out << "bandwidth " << format_double(kde.bandwidth) << '\n';
  out << "centers " << kde.size() << ' ' << kde.dim() << '\n';
  for (long i = 0; i < kde.centers.rows(); ++i) write_row(out, "center", kde.centers.row(i));
  out << "end\n";
}

KdeModel read_kde(std::istream& in, ArtifactHeader* header) {
  LineReader r(in);
  const ArtifactHeader h = parse_header(r, "kde");
  if (header) *header = h;
  KdeModel kde;
  kde.bandwidth = parse_double(r.expect("bandwidth", 1)[1]);
  const auto sizes = r.expect("centers", 2);
  const long m = std::stol(sizes[1]);
  const long d = std::stol(sizes[2]);
  kde.centers.resize(m, d);
  for (long i = 0; i < m; ++i) kde.centers.row(i) = r.expect_vector("center", d).transpose();
  r.expect("end");
  require_valid(validate(kde), "kde");
  return kde;
}

std::uint64_t gram_checksum(const Eigen::MatrixXd& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (long i = 0; i < values.rows(); ++i) {
    for (long j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      h = fnv1a(std::string_view(bytes, 8), h);
    }
  }
  return h;
}

void write_gram(std::ostream& out, const ArtifactHeader& header, const GramMatrix& gram,
                const PsdReport& psd) {
  require_valid(validate(gram), "gram");
  write_header(out, header);
  require_token(gram.kernel.kernel_id, "kernel id");
  out << "kernel " << gram.kernel.kernel_id << '\n';
  for (const auto& [key, value] : gram.kernel.params) {
    require_token(key, "kernel parameter name");
    require_token(value, "kernel parameter value");
    out << "param " << key << ' ' << value << '\n';
  }
  out << "size " << gram.size() << '\n';
  for (std::size_t i = 0; i < gram.ids.size(); ++i) {
    require_token(gram.ids[i], "example id");
    const std::string label = gram.labels.empty() ? "" : gram.labels[i];
    if (!label.empty()) require_token(label, "example label");
    out << "example " << gram.ids[i] << ' ' << label_or_dash(label) << '\n';
  }
  out << "psd_min_eigenvalue " << format_double(psd.min_eigenvalue) << '\n';
  out << "psd_trace " << format_double(psd.trace) << '\n';
  out << "psd_pass " << (psd.pass ? 1 : 0) << '\n';
  for (long i = 0; i < gram.values.rows(); ++i) write_row(out, "row", gram.values.row(i));
  out << "checksum " << hex64(gram_checksum(gram.values)) << '\n';
  out << "end\n";
}

GramMatrix read_gram(std::istream& in, ArtifactHeader* header) {
  LineReader r(in);
  const ArtifactHeader h = parse_header(r, "gram");
  if (header) *header = h;
  GramMatrix g;
  g.kernel.kernel_id = r.expect("kernel", 1)[1];
  auto tok = r.next();
  while (tok[0] == "param") {
    if (tok.size() != 3) throw std::invalid_argument("gram: malformed param line");
    g.kernel.params[tok[1]] = tok[2];
    tok = r.next();
  }
  if (tok[0] != "size" || tok.size() != 2) throw std::invalid_argument("gram: expected size");
  const long n = std::stol(tok[1]);
  bool any_label = false;
  for (long i = 0; i < n; ++i) {
    const auto ex = r.expect("example", 2);
    g.ids.push_back(ex[1]);
    g.labels.push_back(dash_to_empty(ex[2]));
    any_label = any_label || !g.labels.back().empty();
  }
  if (!any_label) g.labels.clear();
  r.expect("psd_min_eigenvalue", 1);
  r.expect("psd_trace", 1);
  r.expect("psd_pass", 1);
  g.values.resize(n, n);
  for (long i = 0; i < n; ++i) g.values.row(i) = r.expect_vector("row", n).transpose();
  const std::string stored = r.expect("checksum", 1)[1];
  if (stored != hex64(gram_checksum(g.values))) {
    throw std::invalid_argument("gram: checksum mismatch (file corrupted)");
  }
  r.expect("end");
  require_valid(validate(g), "gram");
  return g;
}

void write_cv_report(std::ostream& out, const ArtifactHeader& header, const std::string& method,
                     const CvReport& report) {
  write_header(out, header);
  out << "method " << method << '\n';
  out << "columns grid_point fold test_size error kkt_residual\n";
  for (const auto& row : report.rows) {
    out << "fold_row " << row.grid_point << ' ' << row.fold << ' ' << row.test_size << ' '
        << format_double(row.error) << ' ' << format_double(row.kkt_residual) << '\n';
  }
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    out << "mean_row " << report.grid[g] << ' ' << format_double(report.mean_error[g])
        << (g == report.best ? " best" : "") << '\n';
  }
  out << "end\n";
}

ArtifactHeader read_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  LineReader r(in);
  return parse_header(r, "");
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot write " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SequenceFormat parse_format(const std::string& name) {
  if (name == "discrete" || name == "discrete-seq") return SequenceFormat::Discrete;
  if (name == "continuous" || name == "continuous-seq") return SequenceFormat::Continuous;
  if (name == "ucr") return SequenceFormat::Ucr;
  throw std::invalid_argument("unknown dataset format '" + name + "'");
}

Dataset load_dataset(const std::string& path, SequenceFormat format) {
  try {
    return parse_dataset(read_file(path), format);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

Dataset parse_dataset(const std::string& text, SequenceFormat format) {
  Dataset data;
  data.discrete = format == SequenceFormat::Discrete;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  int max_symbol = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_ws(line).empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    std::string label;
    std::vector<std::string> values;
    if (format == SequenceFormat::Ucr) {
      std::string spaced = line;
      for (char& c : spaced) {
        if (c == ',') c = ' ';
      }
      values = split_ws(spaced);
      label = normalize_label(values.front());
      values.erase(values.begin());
    } else {
      const auto tab = line.find('\t');
      if (tab != std::string::npos) {
        const auto lab = split_ws(line.substr(0, tab));
        if (lab.size() > 1) throw std::invalid_argument(where + "label contains whitespace");
        if (!lab.empty()) label = lab.front();
        values = split_ws(line.substr(tab + 1));
      } else {
        values = split_ws(line);
      }
    }
    if (values.empty()) throw std::invalid_argument(where + "sequence is empty");
    if (data.discrete) {
      SymbolSequence seq;
      for (const auto& v : values) {
        int s = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size() || s < 0) {
          throw std::invalid_argument(where + "'" + v + "' is not a non-negative symbol");
        }
        max_symbol = std::max(max_symbol, s);
        seq.push_back(s);
      }
      data.sequences.emplace_back(std::move(seq));
    } else {
      VectorSequence seq(static_cast<long>(values.size()), 1);
      for (std::size_t t = 0; t < values.size(); ++t) {
        try {
          seq(static_cast<long>(t), 0) = parse_double(values[t]);
        } catch (const std::invalid_argument&) {
          throw std::invalid_argument(where + "'" + values[t] + "' is not a number");
        }
        if (!std::isfinite(seq(static_cast<long>(t), 0))) {
          throw std::invalid_argument(where + "non-finite value");
        }
      }
      data.sequences.emplace_back(std::move(seq));
    }
    data.labels.push_back(label);
    data.line_numbers.push_back(line_no);
  }
  if (data.sequences.empty()) throw std::invalid_argument("dataset contains no sequences");
  data.alphabet = max_symbol + 1;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    data.ids.push_back(make_id(i, data.sequences.size()));
  }
  return data;
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.labels[i].empty()) out << data.labels[i] << '\t';
    if (const auto* s = std::get_if<SymbolSequence>(&data.sequences[i])) {
      for (std::size_t t = 0; t < s->size(); ++t) out << (t ? " " : "") << (*s)[t];
    } else {
      const auto& v = std::get<VectorSequence>(data.sequences[i]);
      for (long t = 0; t < v.rows(); ++t) out << (t ? " " : "") << format_double(v(t, 0));
    }
    out << '\n';
  }
  return out.str();
}

FeatureTable parse_feature_table(const std::string& text) {
  FeatureTable table;
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_ws(line).empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::invalid_argument(where + "expected id<TAB>group<TAB>values");
    const auto id = split_ws(line.substr(0, t1));
    const auto group = split_ws(line.substr(t1 + 1, t2 - t1 - 1));
    if (id.size() != 1 || group.size() != 1) {
      throw std::invalid_argument(where + "id and group must be single tokens");
    }
    std::vector<double> v;
    for (const auto& tok : split_ws(line.substr(t2 + 1))) {
      try {
        v.push_back(parse_double(tok));
      } catch (const std::invalid_argument&) {
        throw std::invalid_argument(where + "'" + tok + "' is not a number");
      }
      if (!std::isfinite(v.back())) throw std::invalid_argument(where + "non-finite value");
    }
    if (v.empty()) throw std::invalid_argument(where + "no feature values");
    if (!rows.empty() && v.size() != rows.front().size()) {
      throw std::invalid_argument(where + "expected " + std::to_string(rows.front().size()) +
                                  " values, found " + std::to_string(v.size()));
    }
    table.ids.push_back(id.front());
    table.groups.push_back(group.front());
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw std::invalid_argument("feature table is empty");
  table.values.resize(static_cast<long>(rows.size()), static_cast<long>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    }
  }
  return table;
}

}  // namespace meanmap
