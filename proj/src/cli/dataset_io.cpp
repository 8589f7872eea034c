#include "bayeshield/cli/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace bayeshield::cli {

namespace {

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line)
{
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) {
      return fields;
    }
    start = comma + 1;
  }
}

[[noreturn]] void fail(const std::string& source, std::size_t line, std::size_t column, const std::string& what)
{
  std::ostringstream msg;
  msg << source << ":" << line;
  if (column > 0) {
    msg << ":" << column;
  }
  msg << ": " << what;
  throw InputError(msg.str());
}

std::optional<double> parse_double(std::string_view s)
{
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return value;
}

std::optional<long long> parse_integer(std::string_view s)
{
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return value;
}

} // namespace

std::string format_double(double value)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

CsvDataset parse_dataset_csv(const std::string& text, const std::string& source)
{
  const auto lines = split_lines(text);
  std::optional<int> declared_k;
  std::size_t header_line = 0;
  std::size_t dim = 0;

  std::size_t ln = 0;
  for (; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty()) {
      continue;
    }
    if (line.front() != '#') {
      break;
    }
    const auto body = trim(line.substr(1));
    if (body.starts_with("version=")) {
      if (trim(body.substr(8)) != "1") {
        fail(source, ln + 1, 0, "unsupported dataset version '" + std::string(body.substr(8)) + "'");
      }
    } else if (body.starts_with("k=")) {
      const auto k = parse_integer(trim(body.substr(2)));
      if (!k || *k < 1 || *k > 1'000'000) {
        fail(source, ln + 1, 0, "class count in '# k=' must be a positive integer");
      }
      declared_k = static_cast<int>(*k);
    }
  }
  if (ln == lines.size()) {
    throw InputError(source + ": missing header row");
  }

  header_line = ln + 1;
  const auto header = split_fields(trim(lines[ln]));
  if (header.size() < 2 || header.back() != "label") {
    fail(source, header_line, header.size(), "header must be f0,...,f<d-1>,label");
  }
  dim = header.size() - 1;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[c] != "f" + std::to_string(c)) {
      fail(source, header_line, c + 1,
           "expected column name 'f" + std::to_string(c) + "', found '" + std::string(header[c]) + "'");
    }
  }

  struct Row
  {
    std::size_t line;
    std::vector<double> features;
    std::string_view label;
  };
  std::vector<Row> rows;
  for (++ln; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != dim + 1) {
      fail(source, ln + 1, 0,
           "expected " + std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()));
    }
    Row row{ ln + 1, {}, fields.back() };
    for (std::size_t c = 0; c < dim; ++c) {
      const auto v = parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        fail(source, ln + 1, c + 1, "feature '" + std::string(fields[c]) + "' is not a finite number");
      }
      row.features.push_back(*v);
    }
    if (row.label.empty()) {
      fail(source, ln + 1, dim + 1, "empty label");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw InputError(source + ": a dataset needs at least 2 rows, found " + std::to_string(rows.size()));
  }

  const bool numeric = std::all_of(rows.begin(), rows.end(), [](const Row& r) {
    return parse_integer(r.label).has_value();
  });

  std::vector<std::string> label_names;
  std::vector<int> labels;
  labels.reserve(rows.size());
  if (numeric) {
    int max_label = 0;
    for (const auto& r : rows) {
      const long long y = *parse_integer(r.label);
      if (y < 0) {
        fail(source, r.line, dim + 1, "label " + std::to_string(y) + " is negative");
      }
      if (declared_k && y >= *declared_k) {
        fail(source, r.line, dim + 1,
             "label " + std::to_string(y) + " is outside the declared class set 0.." +
               std::to_string(*declared_k - 1));
      }
      if (y > 1'000'000) {
        fail(source, r.line, dim + 1, "label " + std::to_string(y) + " is implausibly large");
      }
      labels.push_back(static_cast<int>(y));
      max_label = std::max(max_label, static_cast<int>(y));
    }
    if (!declared_k) {
      declared_k = max_label + 1;
    }
  } else {
    std::map<std::string, int, std::less<>> index;
    for (const auto& r : rows) {
      auto it = index.find(r.label);
      if (it == index.end()) {
        const int next = static_cast<int>(label_names.size());
        if (declared_k && next >= *declared_k) {
          fail(source, r.line, dim + 1,
               "label '" + std::string(r.label) + "' exceeds the declared " + std::to_string(*declared_k) +
                 " classes");
        }
        it = index.emplace(std::string(r.label), next).first;
        label_names.emplace_back(r.label);
      }
      labels.push_back(it->second);
    }
    if (!declared_k) {
      declared_k = static_cast<int>(label_names.size());
    }
  }

  Matrix points(static_cast<Index>(rows.size()), static_cast<Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      points(static_cast<Index>(i), static_cast<Index>(c)) = rows[i].features[c];
    }
  }
  return CsvDataset{ LabeledDataset(std::move(points), std::move(labels), *declared_k),
                     std::move(label_names) };
}

std::string read_text_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

CsvDataset read_dataset_csv(const std::filesystem::path& path)
{
  return parse_dataset_csv(read_text_file(path), path.string());
}

std::string format_dataset_csv(const LabeledDataset& data, const std::vector<std::string>& label_names)
{
  std::string out = "# version=1\n# k=" + std::to_string(data.num_classes()) + "\n";
  for (Index c = 0; c < data.dim(); ++c) {
    out += "f" + std::to_string(c) + ",";
  }
  out += "label\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index c = 0; c < data.dim(); ++c) {
      out += format_double(data.points()(i, c));
      out += ',';
    }
    const int y = data.label(i);
    out += label_names.empty() ? std::to_string(y) : label_names.at(static_cast<std::size_t>(y));
    out += '\n';
  }
  return out;
}

std::string format_trace_csv(const std::vector<double>& trace)
{
  std::string out = "iter,bayes_error\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out += std::to_string(k) + "," + format_double(trace[k]) + "\n";
  }
  return out;
}

std::string format_deltas_csv(const Matrix& deltas)
{
  std::string out;
  for (Index c = 0; c < deltas.cols(); ++c) {
    out += (c > 0 ? ",f" : "f") + std::to_string(c);
  }
  out += '\n';
  for (Index i = 0; i < deltas.rows(); ++i) {
    for (Index c = 0; c < deltas.cols(); ++c) {
      if (c > 0) {
        out += ',';
      }
      out += format_double(deltas(i, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<Index> parse_frozen_indices(const std::string& text, const std::string& source)
{
  std::vector<Index> indices;
  const auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto value = parse_integer(line);
    if (!value || *value < 0) {
      fail(source, ln + 1, 1, "'" + std::string(line) + "' is not a non-negative integer index");
    }
    indices.push_back(static_cast<Index>(*value));
  }
  return indices;
}

std::vector<Index> read_frozen_indices(const std::filesystem::path& path)
{
  return parse_frozen_indices(read_text_file(path), path.string());
}

} // namespace bayeshield::cli
