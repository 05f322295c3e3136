#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sage {

enum class ErrorCode {
    MissingFile,
    MalformedRecord,
    DuplicateId,
    UnknownId,
    EmptyCorpus,
    EmptyQuery,
    RetrievalUnavailable,
    BackendUnavailable,
    BudgetExceeded,
    ScriptExhausted,
    MalformedScript,
    UnclosedTag,
    NestedTag,
    GenerationIncomplete,
    ModePreconditionViolated,
    EmptyInput,
    IoError,
    InvalidConfig,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `detail` carries the offending id, tag, or key and
/// `position` a line number or byte offset where one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string detail = {},
          std::size_t position = 0)
        : std::runtime_error(std::move(message)),
          code_(code),
          detail_(std::move(detail)),
          position_(position) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    std::size_t position() const noexcept { return position_; }

private:
    ErrorCode code_;
    std::string detail_;
    std::size_t position_;
};

}  // namespace sage
