#pragma once

#include "meanmap/distributions.hpp"
#include "meanmap/hmm.hpp"
#include "meanmap/learn.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace meanmap {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Parses a double, accepting "inf"/"-inf"; throws std::invalid_argument.
double parse_double(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
/// Hash of the raw contents of a file.
std::uint64_t hash_file(const std::string& path);

/// Every persisted artifact starts with its kind and the hashes of the
/// configuration and the input that produced it.
struct ArtifactHeader {
  std::string kind;
  std::string config_hash;
  std::string source_hash;
};

void write_hmm(std::ostream& out, const ArtifactHeader& header, const Hmm& hmm);
Hmm read_hmm(std::istream& in, ArtifactHeader* header = nullptr);

void write_kde(std::ostream& out, const ArtifactHeader& header, const KdeModel& kde);
KdeModel read_kde(std::istream& in, ArtifactHeader* header = nullptr);

/// Text matrix with kernel descriptor, ids, labels, PSD report and a checksum
/// over the matrix entries.
void write_gram(std::ostream& out, const ArtifactHeader& header, const GramMatrix& gram,
                const PsdReport& psd);
GramMatrix read_gram(std::istream& in, ArtifactHeader* header = nullptr);
/// FNV-1a over the little-endian bytes of the entries in row-major order.
std::uint64_t gram_checksum(const Eigen::MatrixXd& values);

/// One row per (grid point, fold), then one summary row per grid point with
/// the best marked.
void write_cv_report(std::ostream& out, const ArtifactHeader& header, const std::string& method,
                     const CvReport& report);

/// Reads only the header of an artifact file.
ArtifactHeader read_header(const std::string& path);

/// Writes through a temporary file renamed into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

enum class SequenceFormat { Discrete, Continuous, Ucr };
SequenceFormat parse_format(const std::string& name);

/// Sequences with optional labels. Text lines are `label<TAB>v1 v2 ...` or
/// just the values; UCR files are `label,v1,v2,...` (commas or whitespace).
/// Lines starting with '#' are comments.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<std::string> labels;  // empty strings when unlabeled
  std::vector<Observations> sequences;
  std::vector<long> line_numbers;
  bool discrete = true;
  int alphabet = 0;  // 1 + largest symbol seen, discrete only

  std::size_t size() const { return sequences.size(); }
};

Dataset load_dataset(const std::string& path, SequenceFormat format);
Dataset parse_dataset(const std::string& text, SequenceFormat format);
std::string format_dataset(const Dataset& data);

/// `id<TAB>group<TAB>v1 v2 ...` rows of a feature table.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  Eigen::MatrixXd values;
};

FeatureTable parse_feature_table(const std::string& text);

}  // namespace meanmap
