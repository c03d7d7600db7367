#pragma once

#include <filesystem>
#include <iosfwd>

#include "bgmm/models.hpp"

namespace bgmm {

/// Dataset CSV: header subject,position,Y,X1,...,Xp and one row per
/// (subject, position), subjects and positions 0-based and in order. The
/// partial-correlation layout has no X columns and uses position as the
/// variable index. Values are written in shortest round-trip form.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Throws ParseError with the 1-based line number of the first bad line.
Dataset read_dataset_csv(std::istream& in);
/// Throws IoError when the file cannot be opened.
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace bgmm
