#include "lowrank/io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "lowrank/errors.hpp"

namespace lowrank::io {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const char* name) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IoError("bad " + std::string(name) + " field '" + std::string(field) + "'");
  }
  return value;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string csv_line(const TrialRecord& rec) {
  std::ostringstream out;
  out << rec.n << ',' << rec.p << ',' << rec.r << ',' << rec.trial << ',' << rec.seed << ','
      << format_double(rec.rel_error) << ',' << (rec.success ? 1 : 0) << ',' << to_string(rec.status) << ','
      << format_double(rec.wall_time);
  return out.str();
}

TrialRecord parse_csv_line(const std::string& line) {
  const auto fields = split(strip_cr(line), ',');
  if (fields.size() != 9) {
    throw IoError("expected 9 fields, got " + std::to_string(fields.size()));
  }
  TrialRecord rec;
  rec.n = parse_number<Index>(fields[0], "n");
  rec.p = parse_number<Index>(fields[1], "p");
  rec.r = parse_number<int>(fields[2], "r");
  rec.trial = parse_number<int>(fields[3], "trial");
  rec.seed = parse_number<std::uint64_t>(fields[4], "seed");
  rec.rel_error = parse_number<double>(fields[5], "rel_error");
  const int success = parse_number<int>(fields[6], "success");
  if (success != 0 && success != 1) throw IoError("success must be 0 or 1");
  rec.success = success == 1;
  try {
    rec.status = parse_status(fields[7]);
  } catch (const ArgumentError& e) {
    throw IoError(e.what());
  }
  rec.wall_time = parse_number<double>(fields[8], "wall_time_s");
  return rec;
}

void write_grid_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kGridCsvHeader << '\n';
  for (const auto& rec : records) out << csv_line(rec) << '\n';
}

std::vector<TrialRecord> read_grid_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (strip_cr(line) != kGridCsvHeader) {
    throw IoError("line 1: header must be '" + std::string(kGridCsvHeader) + "'");
  }
  std::vector<TrialRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip_cr(line).empty()) continue;
    try {
      records.push_back(parse_csv_line(line));
    } catch (const IoError& e) {
      throw IoError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void write_grid_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
  // Write beside the target, then rename, so a crash never truncates it.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    write_grid_csv(out, records);
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": " + ec.message());
}

std::vector<TrialRecord> read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  try {
    return read_grid_csv(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_matrix_text(std::ostream& out, const Matrix& x) {
  out << x.rows() << ' ' << x.cols() << '\n';
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) out << (j ? " " : "") << format_double(x(i, j));
    out << '\n';
  }
}

Matrix read_matrix_text(std::istream& in) {
  long long rows = 0;
  long long cols = 0;
  if (!(in >> rows >> cols) || rows < 1 || cols < 1) {
    throw IoError("matrix text: first line must be 'rows cols' with positive integers");
  }
  Matrix x(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      std::string token;
      if (!(in >> token)) {
        throw IoError("matrix text: expected " + std::to_string(rows * cols) + " entries, got " +
                      std::to_string(i * cols + j));
      }
      x(i, j) = parse_number<double>(token, "matrix entry");
    }
  }
  if (!x.allFinite()) throw IoError("matrix text: non-finite entry");
  return x;
}

Matrix read_pgm(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw IoError("pgm: unsupported magic '" + magic + "'");

  // Header tokens may be separated by comments.
  const auto next_int = [&in]() {
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      long long v = -1;
      if (!(in >> v)) throw IoError("pgm: truncated header");
      return v;
    }
  };
  const long long width = next_int();
  const long long height = next_int();
  const long long maxval = next_int();
  if (width < 1 || height < 1) throw IoError("pgm: bad dimensions");
  if (maxval < 1 || maxval > 255) throw IoError("pgm: only 8-bit images (maxval <= 255) are supported");

  Matrix x(height, width);
  if (magic == "P5") {
    in.get();  // single whitespace before the raster
    std::vector<unsigned char> raster(static_cast<std::size_t>(width * height));
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (in.gcount() != static_cast<std::streamsize>(raster.size())) throw IoError("pgm: truncated raster");
    for (Index i = 0; i < height; ++i) {
      for (Index j = 0; j < width; ++j) {
        x(i, j) = raster[static_cast<std::size_t>(i * width + j)] / static_cast<double>(maxval);
      }
    }
  } else {
    for (Index i = 0; i < height; ++i) {
      for (Index j = 0; j < width; ++j) {
        long long v = -1;
        if (!(in >> v) || v < 0 || v > maxval) throw IoError("pgm: bad or missing pixel value");
        x(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  }
  return x;
}

Matrix read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  in.clear();
  in.seekg(0);
  try {
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) return read_pgm(in);
    return read_matrix_text(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace lowrank::io
