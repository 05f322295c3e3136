#pragma once

#include <filesystem>
#include <mutex>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "sage/orchestrator.hpp"
#include "sage/trace.hpp"

namespace sage {

/// Trace log form: `{"role", "raw", "search_steps"}`; `raw` re-parses to the
/// identical trace.
nlohmann::json trace_to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const GenerationRecord& record);
/// Throws MalformedRecord.
GenerationRecord record_from_json(const nlohmann::json& j);

/// File names inside a record directory.
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kTracesFile = "traces.jsonl";

/// Reads `dir/records.jsonl`, or `dir` itself when it names a file. Throws
/// MissingFile or MalformedRecord.
std::vector<GenerationRecord> read_records(const std::filesystem::path& dir);

/// Append-only sink writing records.jsonl and traces.jsonl into a directory
/// (created if needed). Thread-safe. Throws IoError.
class RecordWriter {
public:
    explicit RecordWriter(const std::filesystem::path& dir);

    void write(const GenerationRecord& record);

private:
    std::mutex mutex_;
    std::ofstream records_;
    std::ofstream traces_;
    std::filesystem::path dir_;
};

}  // namespace sage
