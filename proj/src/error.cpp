#include "dfkg/error.hpp"

namespace dfkg {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::RootNotFound: return "RootNotFound";
        case ErrorCode::CorruptDatabase: return "CorruptDatabase";
        case ErrorCode::TableNotFound: return "TableNotFound";
        case ErrorCode::InvalidParts: return "InvalidParts";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::OutOfRangeEpoch: return "OutOfRangeEpoch";
        case ErrorCode::UnknownZone: return "UnknownZone";
        case ErrorCode::DanglingUid: return "DanglingUid";
        case ErrorCode::UnknownEdge: return "UnknownEdge";
        case ErrorCode::IllegalTransition: return "IllegalTransition";
        case ErrorCode::RunNotFound: return "RunNotFound";
        case ErrorCode::StageNotReady: return "StageNotReady";
        case ErrorCode::UnknownUid: return "UnknownUid";
        case ErrorCode::CustodyBreach: return "CustodyBreach";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::RunLocked: return "RunLocked";
        case ErrorCode::Io: return "Io";
        case ErrorCode::EngineFailure: return "EngineFailure";
    }
    return "Unknown";
}

}  // namespace dfkg
