#pragma once

#include <string>

#include "skipfold/absorption.hpp"
#include "skipfold/approx.hpp"
#include "skipfold/block.hpp"
#include "skipfold/json_writer.hpp"
#include "skipfold/verification.hpp"

namespace skipfold::io {

// Weight files: schema_version 1, explicit shapes, finite entries only,
// unknown fields rejected. See README for the layout.

JsonValue matrix_to_json(const Matrix& m);
JsonValue block_to_json(const Block& block);
std::string block_to_json_text(const Block& block);

Block block_from_json_text(const std::string& text);
Block load_block(const std::string& path);
void save_block(const Block& block, const std::string& path);

/// Bare nested array [[...], ...] with a fixed shape (target matrices).
Matrix matrix_from_json_text(const std::string& text);
Matrix load_matrix(const std::string& path);

// Report fragments reused by the CLI and the acceptance suite.
JsonValue certificate_to_json(const absorption::SubsetCertificate& cert);
JsonValue report_to_json(const verification::VerificationReport& report);
JsonValue probe_stats_to_json(const verification::ProbeStats& stats);
JsonValue approx_result_to_json(const approx::ApproxResult& result);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace skipfold::io
