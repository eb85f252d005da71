#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>

#include "json.hpp"

#include "isbench/rle.hpp"
#include "isbench/segmenter.hpp"
#include "isbench/transport.hpp"

namespace isbench {

inline constexpr int kProtocolVersion = 1;

/// Error codes carried by {"type": "error"} responses.
namespace wire_error {
inline constexpr const char* BadRequest = "BAD_REQUEST";          // not JSON, unknown type, missing fields
inline constexpr const char* UnknownSession = "UNKNOWN_SESSION";  // predict/close on a session not open
inline constexpr const char* Unsupported = "UNSUPPORTED";         // feature outside the capabilities
inline constexpr const char* InvalidRequest = "INVALID_REQUEST";  // well formed but out of range
inline constexpr const char* Internal = "INTERNAL";               // segmenter failed
}  // namespace wire_error

nlohmann::json mask_to_json(const RleMask& rle);
RleMask mask_from_json(const nlohmann::json& j);

/// Inline volume: {"dims", "spacing", "dtype", "data": [values, x fastest]}.
nlohmann::json volume_to_json(const Volume& v);
Volume volume_from_json(const nlohmann::json& j);

nlohmann::json open_case_to_json(const CaseRef& ref);
CaseRef open_case_from_json(const nlohmann::json& j);
nlohmann::json predict_to_json(const std::string& session_id, const PredictRequest& r);
PredictRequest predict_from_json(const nlohmann::json& j);

/// Answers one request line with one response line. Every response echoes
/// the request's "id". Malformed input never throws.
class ProtocolServer {
public:
    ProtocolServer(Segmenter& segmenter, std::string name);
    std::string handle(const std::string& line);

private:
    Segmenter& segmenter_;
    std::string name_;
    Capabilities caps_;
    std::set<std::string> sessions_;
};

/// Segmenter reached over a LineTransport. Performs the hello exchange on
/// construction. Transport loss raises SegmenterCrash; error responses
/// raise SegmenterFailure; malformed responses raise ProtocolError.
class ProtocolClient : public Segmenter {
public:
    explicit ProtocolClient(std::unique_ptr<LineTransport> transport);
    ~ProtocolClient() override;

    Capabilities capabilities() override { return caps_; }
    std::string open_case(const CaseRef& ref) override;
    BinaryMask predict(const std::string& session_id, const PredictRequest& request) override;
    void close(const std::string& session_id) override;

    const std::string& name() const noexcept { return name_; }
    std::uint64_t sent() const noexcept { return next_id_; }

private:
    nlohmann::json call(nlohmann::json request, const char* expect);

    std::unique_ptr<LineTransport> transport_;
    Capabilities caps_;
    std::string name_;
    std::uint64_t next_id_ = 0;
};

}  // namespace isbench
