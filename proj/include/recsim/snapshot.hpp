#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <variant>

#include "recsim/mf_recommender.hpp"
#include "recsim/rnn_recommender.hpp"

namespace recsim {

// Binary container: 8-byte magic "RECSIMSN", u32 format version, u32 model
// kind (1 = mf, 2 = rnn), then the payload. Integers and doubles are stored
// little-endian; doubles keep their exact bit patterns.
inline constexpr std::uint32_t kSnapshotVersion = 1;

using ModelSnapshot = std::variant<MfModel, RnnModel>;

void save_model(std::ostream& out, const MfModel& model);
void save_model(std::ostream& out, const RnnModel& model);
void save_model(std::ostream& out, const ModelSnapshot& model);
ModelSnapshot load_model(std::istream& in);

void save_model_file(const std::filesystem::path& path, const ModelSnapshot& model);
ModelSnapshot load_model_file(const std::filesystem::path& path);

std::unique_ptr<Recommender> make_recommender(ModelSnapshot model);

}  // namespace recsim
