#include "isbench/conformance.hpp"

#include <sstream>

#include "isbench/error.hpp"
#include "isbench/image_io.hpp"
#include "isbench/oracles.hpp"
#include "isbench/rle.hpp"
#include "isbench/session.hpp"
#include "isbench/wire.hpp"

namespace isbench {

using nlohmann::json;

namespace {

/// Raw request/response access that turns every endpoint fault into text.
class Probe {
public:
    explicit Probe(LineTransport& t) : t_(t) {}

    bool dead() const noexcept { return dead_; }
    const std::string& why() const noexcept { return why_; }

    bool send_raw(const std::string& line) {
        if (dead_) return false;
        try {
            t_.send_line(line);
            return true;
        } catch (const Error& e) {
            kill(e.what());
            return false;
        }
    }

    std::optional<json> recv(std::string& err) {
        if (dead_) {
            err = why_;
            return std::nullopt;
        }
        std::optional<std::string> line;
        try {
            line = t_.recv_line();
        } catch (const Error& e) {
            kill(e.what());
        }
        if (!line) {
            if (!dead_) kill("endpoint closed the connection");
            err = why_;
            return std::nullopt;
        }
        try {
            auto j = json::parse(*line);
            if (!j.is_object()) throw std::runtime_error("not an object");
            return j;
        } catch (const std::exception&) {
            err = "response is not a JSON object";
            return std::nullopt;
        }
    }

    int send(json request) {
        const int id = next_id_++;
        request["id"] = id;
        send_raw(request.dump());
        return id;
    }

    /// One request, one response with the matching id.
    std::optional<json> call(json request, std::string& err) {
        const int id = send(std::move(request));
        auto r = recv(err);
        if (r && r->value("id", json()) != json(id)) {
            err = "response id " + r->value("id", json()).dump() + " does not match request id " + std::to_string(id);
            return std::nullopt;
        }
        return r;
    }

private:
    void kill(const std::string& why) {
        dead_ = true;
        why_ = "connection lost: " + why;
    }

    LineTransport& t_;
    int next_id_ = 1;
    bool dead_ = false;
    std::string why_;
};

/// Counts lines leaving the engine; forwards to a borrowed transport.
class CountingTransport : public LineTransport {
public:
    explicit CountingTransport(LineTransport& inner) : inner_(inner) {}
    void send_line(const std::string& line) override {
        ++sent;
        inner_.send_line(line);
    }
    std::optional<std::string> recv_line() override { return inner_.recv_line(); }
    std::size_t sent = 0;

private:
    LineTransport& inner_;
};

struct Fixture {
    CaseRef ref;
    BinaryMask target;
    Index3 centre;
    Dims dims;
};

Fixture make_fixture(const std::filesystem::path& dir) {
    SyntheticCaseSpec spec;
    spec.dims = {24, 20, 16};
    spec.instances = 1;
    spec.radius_min = 3;
    spec.radius_max = 4;
    spec.seed = 7;
    spec.case_id = "conformance";
    auto c = generate_synthetic_case(spec);
    std::filesystem::create_directories(dir);
    Fixture f;
    f.ref.case_id = spec.case_id;
    f.ref.image_path = std::filesystem::absolute(dir / "conformance_image.nii.gz");
    f.ref.label_path = std::filesystem::absolute(dir / "conformance_labels.nii.gz");
    write_volume(c.image, f.ref.image_path);
    write_volume(c.labels, f.ref.label_path);
    f.target = c.instances.at(0);
    f.centre = c.centres.at(0);
    f.dims = spec.dims;
    return f;
}

std::optional<PredictRequest> slice_request(const Capabilities& caps, const Fixture& f) {
    PredictRequest r;
    r.scope = Scope::slice(f.centre.z);
    if (caps.accepts_points)
        r.prompts.push_back(Prompt::pos(f.centre));
    else if (caps.accepts_boxes)
        r.prompts.push_back(Prompt::box2d(f.centre.z, bounding_box_2d(extract_slice(f.target, Axis::Z, f.centre.z))));
    else
        return std::nullopt;
    return r;
}

std::optional<PredictRequest> volume_request(const Capabilities& caps, const Fixture& f) {
    PredictRequest r;
    r.scope = Scope::whole();
    if (caps.accepts_points)
        r.prompts.push_back(Prompt::pos(f.centre));
    else if (caps.accepts_boxes)
        r.prompts.push_back(Prompt::box3d(bounding_box_3d(f.target)));
    else
        return std::nullopt;
    return r;
}

/// Collects mask responses for the dims and RLE clauses.
struct MaskChecks {
    std::size_t seen = 0;
    std::vector<std::string> dims_faults;
    std::vector<std::string> rle_faults;

    void check(const std::string& what, const json& response, const Dims& expected) {
        ++seen;
        RleMask rle;
        try {
            rle = mask_from_json(response.at("mask"));
        } catch (const std::exception& e) {
            rle_faults.push_back(what + ": " + e.what());
            dims_faults.push_back(what + ": no readable dims");
            return;
        }
        if (const auto d = rle_defect(rle); !d.empty()) rle_faults.push_back(what + ": " + d);
        if (!(rle.dims == expected)) {
            std::ostringstream s;
            s << what << ": got " << rle.dims.nx << "x" << rle.dims.ny << "x" << rle.dims.nz << ", expected "
              << expected.nx << "x" << expected.ny << "x" << expected.nz;
            dims_faults.push_back(s.str());
        }
    }
};

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
    return out;
}

bool is_error(const std::optional<json>& r, const char* code) {
    return r && r->value("type", std::string()) == "error" && r->value("code", std::string()) == code;
}

std::string describe(const std::optional<json>& r, const std::string& err) {
    if (!r) return err;
    auto s = r->dump();
    if (s.size() > 160) s = s.substr(0, 160) + "...";
    return "got " + s;
}

}  // namespace

std::string_view clause_status_name(ClauseStatus status) noexcept {
    switch (status) {
        case ClauseStatus::Pass: return "PASS";
        case ClauseStatus::Fail: return "FAIL";
        case ClauseStatus::Skip: return "SKIP";
    }
    return "?";
}

bool ConformanceReport::passed() const {
    for (const auto& c : clauses)
        if (c.status == ClauseStatus::Fail) return false;
    return true;
}

const ConformanceClause* ConformanceReport::find(const std::string& id) const {
    for (const auto& c : clauses)
        if (c.id == id) return &c;
    return nullptr;
}

std::string ConformanceReport::to_text() const {
    std::ostringstream s;
    s << "segmenter: " << (segmenter_name.empty() ? "?" : segmenter_name) << "\n";
    s << "capabilities: " << capabilities_to_json(caps).dump() << "\n";
    for (const auto& c : clauses) {
        s << clause_status_name(c.status) << "  " << c.id;
        if (!c.detail.empty()) s << "  (" << c.detail << ")";
        s << "\n";
    }
    s << (passed() ? "conformance: PASS" : "conformance: FAIL") << "\n";
    return s.str();
}

json ConformanceReport::to_json() const {
    json clauses_j = json::array();
    for (const auto& c : clauses)
        clauses_j.push_back({{"clause", c.id}, {"status", clause_status_name(c.status)}, {"detail", c.detail}});
    return {{"segmenter", segmenter_name},
            {"capabilities", capabilities_to_json(caps)},
            {"clauses", clauses_j},
            {"passed", passed()}};
}

ConformanceReport conformance_test(LineTransport& transport, const std::filesystem::path& work_dir) {
    ConformanceReport report;
    auto add = [&](std::string id, ClauseStatus st, std::string detail = {}) {
        report.clauses.push_back({std::move(id), st, std::move(detail)});
    };
    const auto fx = make_fixture(work_dir);
    const Dims slice_dims = Scope::slice(0).mask_dims(fx.dims);
    Probe probe(transport);
    std::string err;

    // HELLO
    {
        const auto r = probe.call({{"type", "hello"}, {"protocol", kProtocolVersion}}, err);
        if (r && r->value("type", std::string()) == "capabilities" && r->contains("capabilities")) {
            try {
                report.caps = capabilities_from_json(r->at("capabilities"));
                report.segmenter_name = r->value("name", std::string());
                const auto proto = r->value("protocol", kProtocolVersion);
                add("HELLO", proto == kProtocolVersion ? ClauseStatus::Pass : ClauseStatus::Fail,
                    proto == kProtocolVersion ? "" : "protocol version " + std::to_string(proto));
            } catch (const std::exception& e) {
                add("HELLO", ClauseStatus::Fail, std::string("bad capabilities: ") + e.what());
            }
        } else {
            add("HELLO", ClauseStatus::Fail, describe(r, err));
        }
    }
    const auto& caps = report.caps;

    // OPEN_CASE
    std::string sid;
    {
        const auto r = probe.call(open_case_to_json(fx.ref), err);
        if (r && r->value("type", std::string()) == "ack" && r->contains("session_id") && (*r)["session_id"].is_string()) {
            sid = (*r)["session_id"].get<std::string>();
            add("OPEN_CASE", ClauseStatus::Pass);
        } else {
            add("OPEN_CASE", ClauseStatus::Fail, describe(r, err));
        }
    }

    MaskChecks masks;
    auto predict_clause = [&](const std::string& id, bool supported, const std::optional<PredictRequest>& req,
                              const Dims& expected, const char* unsupported_why) {
        if (!supported) return add(id, ClauseStatus::Skip, unsupported_why);
        if (!req) return add(id, ClauseStatus::Skip, "no prompt kind advertised");
        if (sid.empty()) return add(id, ClauseStatus::Fail, "no open session");
        const auto r = probe.call(predict_to_json(sid, *req), err);
        if (r && r->value("type", std::string()) == "mask" && r->contains("mask")) {
            masks.check(id, *r, expected);
            add(id, ClauseStatus::Pass);
        } else {
            add(id, ClauseStatus::Fail, describe(r, err));
        }
    };

    const auto sreq = slice_request(caps, fx);
    const auto vreq = volume_request(caps, fx);
    predict_clause("SCOPE_SLICE", caps.supports_2d, sreq, slice_dims, "supports_2d not advertised");
    predict_clause("SCOPE_VOLUME", caps.supports_3d, vreq, fx.dims, "supports_3d not advertised");

    // PREV_MASK
    {
        std::optional<PredictRequest> req = caps.supports_2d ? sreq : vreq;
        if (req) {
            if (req->scope.volume)
                req->prev_mask = fx.target;
            else
                req->prev_mask = as_volume(extract_slice(fx.target, Axis::Z, req->scope.index));
        }
        predict_clause("PREV_MASK", caps.accepts_mask_prompt && (caps.supports_2d || caps.supports_3d), req,
                       req && req->scope.volume ? fx.dims : slice_dims, "mask prompts not advertised");
    }

    if (masks.seen == 0) {
        add("MASK_DIMS", ClauseStatus::Skip, "no mask responses");
        add("RLE_VALID", ClauseStatus::Skip, "no mask responses");
    } else {
        add("MASK_DIMS", masks.dims_faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail, join(masks.dims_faults));
        add("RLE_VALID", masks.rle_faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail, join(masks.rle_faults));
    }

    // ORDERED_RESPONSES: pipeline several requests before reading any reply.
    {
        std::vector<int> ids;
        ids.push_back(probe.send({{"type", "hello"}, {"protocol", kProtocolVersion}}));
        const auto& req = caps.supports_2d ? sreq : vreq;
        if (!sid.empty() && req && (caps.supports_2d || caps.supports_3d)) ids.push_back(probe.send(predict_to_json(sid, *req)));
        ids.push_back(probe.send({{"type", "hello"}, {"protocol", kProtocolVersion}}));
        std::vector<std::string> faults;
        for (const int id : ids) {
            const auto r = probe.recv(err);
            if (!r) {
                faults.push_back(err);
                break;
            }
            if (r->value("id", json()) != json(id))
                faults.push_back("expected id " + std::to_string(id) + ", got " + r->value("id", json()).dump());
        }
        add("ORDERED_RESPONSES", faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail, join(faults));
    }

    // ERROR_CODES
    {
        std::vector<std::string> faults;
        probe.send_raw("{this is not json");
        const auto bad = probe.recv(err);
        if (!is_error(bad, wire_error::BadRequest)) faults.push_back("malformed line: " + describe(bad, err));
        const auto unknown =
            probe.call({{"type", "predict"}, {"session_id", "no-such-session"}, {"scope", scope_to_json(Scope::whole())},
                        {"prompts", json::array()}},
                       err);
        if (!is_error(unknown, wire_error::UnknownSession)) faults.push_back("unknown session: " + describe(unknown, err));
        const auto alive = probe.call({{"type", "hello"}, {"protocol", kProtocolVersion}}, err);
        if (!alive || alive->value("type", std::string()) != "capabilities")
            faults.push_back("connection did not survive: " + describe(alive, err));
        add("ERROR_CODES", faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail, join(faults));
    }

    // CLOSE
    if (sid.empty()) {
        add("CLOSE", ClauseStatus::Fail, "no open session");
    } else {
        std::vector<std::string> faults;
        const auto r = probe.call({{"type", "close"}, {"session_id", sid}}, err);
        if (!r || r->value("type", std::string()) != "ack") faults.push_back("close: " + describe(r, err));
        const auto after = probe.call(
            {{"type", "predict"}, {"session_id", sid}, {"scope", scope_to_json(Scope::whole())}, {"prompts", json::array()}},
            err);
        if (!is_error(after, wire_error::UnknownSession)) faults.push_back("predict after close: " + describe(after, err));
        add("CLOSE", faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail, join(faults));
    }

    // CAPABILITY_RESPECT: the engine refuses unadvertised features before
    // anything reaches the wire.
    if (probe.dead()) {
        add("CAPABILITY_RESPECT", ClauseStatus::Fail, probe.why());
    } else {
        try {
            auto counting = std::make_unique<CountingTransport>(transport);
            auto* counter = counting.get();
            ProtocolClient client(std::move(counting));
            const auto csid = client.open_case(fx.ref);
            SegmenterHandle handle(client, csid, client.capabilities());
            std::vector<std::pair<std::string, PredictRequest>> probes;
            const auto any_scope = caps.supports_2d ? Scope::slice(fx.centre.z) : Scope::whole();
            if (!caps.supports_2d) probes.push_back({"slice scope", {Scope::slice(fx.centre.z), {}, {}}});
            if (!caps.supports_3d) probes.push_back({"volume scope", {Scope::whole(), {}, {}}});
            if (!caps.accepts_points) probes.push_back({"points", {any_scope, {Prompt::pos(fx.centre)}, {}}});
            if (!caps.accepts_neg_points) probes.push_back({"negative points", {any_scope, {Prompt::neg(fx.centre)}, {}}});
            if (!caps.accepts_boxes)
                probes.push_back({"boxes", {Scope::whole(), {Prompt::box3d(bounding_box_3d(fx.target))}, {}}});
            if (!caps.accepts_mask_prompt) probes.push_back({"mask prompt", {Scope::whole(), {}, fx.target}});
            std::vector<std::string> faults;
            for (const auto& [what, req] : probes) {
                const auto before = counter->sent;
                try {
                    handle.send(req, fx.dims, 0, "conformance");
                    faults.push_back(what + " was sent");
                } catch (const Error& e) {
                    if (e.code() != Errc::CapabilityMissing) faults.push_back(what + ": " + e.what());
                }
                if (counter->sent != before) faults.push_back(what + " reached the wire");
            }
            client.close(csid);
            std::vector<std::string> withheld;
            for (const auto& pr : probes) withheld.push_back(pr.first);
            add("CAPABILITY_RESPECT", faults.empty() ? ClauseStatus::Pass : ClauseStatus::Fail,
                !faults.empty()    ? join(faults)
                : probes.empty() ? "every feature advertised"
                                 : "withheld: " + join(withheld));
        } catch (const std::exception& e) {
            add("CAPABILITY_RESPECT", ClauseStatus::Fail, e.what());
        }
    }
    return report;
}

}  // namespace isbench
