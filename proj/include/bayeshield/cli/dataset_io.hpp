#pragma once

#include "bayeshield/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bayeshield::cli {

//! Malformed or inconsistent input file. The message names the file and,
//! where one applies, the 1-based line and column.
class InputError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

//! Dataset CSV:
//!
//!   # version=1          optional; other versions are rejected
//!   # k=3                optional; pins the class count
//!   f0,f1,label
//!   0.25,-1.5,0
//!
//! Labels are non-negative integers, or arbitrary strings mapped to 0, 1, ...
//! in order of first appearance. Without `# k=` the class count is
//! max label + 1 (or the number of distinct strings).
struct CsvDataset
{
  LabeledDataset data;
  //! Original label strings when the file used non-numeric labels.
  std::vector<std::string> label_names;
};

CsvDataset parse_dataset_csv(const std::string& text, const std::string& source = "<input>");
CsvDataset read_dataset_csv(const std::filesystem::path& path);

//! Canonical form: version and k comments, header, shortest round-trip
//! decimal features. Parsing then writing a canonical file is byte-exact.
std::string format_dataset_csv(const LabeledDataset& data,
                               const std::vector<std::string>& label_names = {});

//! Shortest decimal string that reads back to the same double.
std::string format_double(double value);

//! `iter,bayes_error` with row 0 the unperturbed estimate.
std::string format_trace_csv(const std::vector<double>& trace);

//! Same shape as the features, columns f0..f(d-1).
std::string format_deltas_csv(const Matrix& deltas);

//! One zero-based index per line; blank lines and `#` comments are ignored.
std::vector<Index> parse_frozen_indices(const std::string& text, const std::string& source = "<input>");
std::vector<Index> read_frozen_indices(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace bayeshield::cli
