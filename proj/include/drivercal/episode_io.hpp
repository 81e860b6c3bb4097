#pragma once

#include "drivercal/synth.hpp"
#include "drivercal/trajdata.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace drivercal::episode_io {

inline constexpr int kFormatVersion = 1;

struct EpisodeFile {
  std::string dataset_name;
  std::vector<trajdata::FollowEpisode> episodes;
};

// Episode container round-trip.  Files carry a format_version field; an
// unknown version or a structurally wrong document raises SchemaError.
void write_episodes(const std::filesystem::path& path, const EpisodeFile& file);
EpisodeFile read_episodes(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path,
                  const synth::GroundTruthLabels& labels);
synth::GroundTruthLabels read_labels(const std::filesystem::path& path);

void write_summary(const std::filesystem::path& path,
                   const trajdata::DatasetSummary& summary);

}  // namespace drivercal::episode_io
