#pragma once

// File formats: the grid CSV, plain-text matrices and 8-bit PGM images.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lowrank/harness.hpp"
#include "lowrank/linalg.hpp"

namespace lowrank::io {

inline constexpr const char* kGridCsvHeader = "n,p,r,trial,seed,rel_error,success,status,wall_time_s";

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

std::string csv_line(const TrialRecord& record);
TrialRecord parse_csv_line(const std::string& line);

void write_grid_csv(std::ostream& out, const std::vector<TrialRecord>& records);
/// Throws IoError naming the line on malformed input, including
/// a header that differs from kGridCsvHeader.
std::vector<TrialRecord> read_grid_csv(std::istream& in);

void write_grid_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_grid_csv(const std::filesystem::path& path);

/// "rows cols" on the first line, then row-major whitespace-separated reals.
void write_matrix_text(std::ostream& out, const Matrix& x);
Matrix read_matrix_text(std::istream& in);

/// Binary (P5) or ASCII (P2) PGM with maxval <= 255, mapped to [0, 1].
Matrix read_pgm(std::istream& in);

/// Chooses the reader from the magic bytes ("P5"/"P2" for PGM).
Matrix read_image(const std::filesystem::path& path);

}  // namespace lowrank::io
