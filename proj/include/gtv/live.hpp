#pragma once

// Live monitoring: a receiver feed (file, named pipe or stdin) checked against
// real Roughtime and NTS servers, or against local mock servers.

#include <optional>
#include <ostream>
#include <string>

#include "gtv/config.hpp"
#include "gtv/pipeline.hpp"
#include "gtv/receiver_feed.hpp"

namespace gtv::live {

struct LiveOptions {
  std::string feed = "-";  // path, or "-" for stdin
  FeedFormat format = FeedFormat::Jsonl;
  /// Replay a recorded JSONL feed at its own cadence instead of as fast as it reads.
  bool pace = false;
  std::optional<std::string> out_dir;
  bool verdicts_csv = false;

  /// Serve Roughtime, NTS-KE and NTS on 127.0.0.1 in-process and monitor against them.
  bool mock_providers = false;
  /// Shut the mocks down after this many epochs (connectivity loss).
  std::optional<uint64_t> mock_stop_after;
  /// The mock NTS server reports time shifted by this much.
  std::optional<SignedDuration> mock_nts_bias;
};

/// Runs until the feed ends. Verdicts stream to `verdicts` as they occur.
pipeline::RunReport run_live(const config::RunConfig& cfg, const LiveOptions& opts, std::ostream& verdicts);

}  // namespace gtv::live
