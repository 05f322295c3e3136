#include "sage/error.hpp"

namespace sage {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::RetrievalUnavailable: return "RetrievalUnavailable";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::MalformedScript: return "MalformedScript";
        case ErrorCode::UnclosedTag: return "UnclosedTag";
        case ErrorCode::NestedTag: return "NestedTag";
        case ErrorCode::GenerationIncomplete: return "GenerationIncomplete";
        case ErrorCode::ModePreconditionViolated: return "ModePreconditionViolated";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace sage
