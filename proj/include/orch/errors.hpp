#pragma once

#include <stdexcept>
#include <string>

namespace orch {

/// Base class for all runtime errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Network or HTTP-level failure talking to a live backend.
struct TransportError : Error {
    using Error::Error;
};

/// The backend answered, but the response body does not match the wire format.
struct WireFormatError : Error {
    using Error::Error;
};

/// A scripted cassette was exhausted or, in strict mode, the request
/// fingerprint did not match the next recorded entry.
struct CassetteMismatchError : Error {
    using Error::Error;
};

/// Episode-level failure; the message carries the turn index.
struct EpisodeError : Error {
    EpisodeError(int turn, const std::string& what)
        : Error("turn " + std::to_string(turn) + ": " + what), turn_index(turn) {}
    int turn_index;
};

/// Executor returned an empty completion for a routed request.
struct EmptyFeedbackError : Error {
    using Error::Error;
};

/// Policy output stayed malformed after the configured handling was exhausted.
struct MalformedEmissionError : Error {
    MalformedEmissionError(const std::string& what, std::string emission)
        : Error(what), last_emission(std::move(emission)) {}
    std::string last_emission;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DatasetError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

}  // namespace orch
