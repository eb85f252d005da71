#include "isbench/wire.hpp"

#include "isbench/error.hpp"

namespace isbench {

using nlohmann::json;

namespace {

json dims_json(const Dims& d) { return json::array({d.nx, d.ny, d.nz}); }

Dims dims_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(Errc::InvalidArgument, "dims must be [nx, ny, nz]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

json error_reply(const json& id, const char* code, const std::string& message) {
    json r{{"type", "error"}, {"code", code}, {"message", message}};
    if (!id.is_null()) r["id"] = id;
    return r;
}

}  // namespace

json mask_to_json(const RleMask& rle) { return json{{"dims", dims_json(rle.dims)}, {"runs", rle.runs}}; }

RleMask mask_from_json(const json& j) {
    try {
        RleMask m{dims_from(j.at("dims")), j.at("runs").get<std::vector<std::uint64_t>>()};
        return m;
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRle, std::string("bad mask: ") + e.what());
    }
}

json volume_to_json(const Volume& v) {
    const auto& s = v.spacing();
    return json{{"dims", dims_json(v.dims())},
                {"spacing", {s.sx, s.sy, s.sz}},
                {"dtype", dtype_name(v.dtype())},
                {"data", std::vector<float>(v.data().begin(), v.data().end())}};
}

Volume volume_from_json(const json& j) {
    try {
        Spacing sp;
        if (j.contains("spacing")) {
            const auto& a = j.at("spacing");
            sp = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        }
        return Volume(dims_from(j.at("dims")), sp, parse_dtype(j.value("dtype", std::string("float32"))),
                      j.at("data").get<std::vector<float>>());
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad inline volume: ") + e.what());
    }
}

json open_case_to_json(const CaseRef& ref) {
    json j{{"type", "open_case"}, {"case_id", ref.case_id}, {"instance_policy", ref.instance_policy}};
    if (ref.image)
        j["image"] = volume_to_json(*ref.image);
    else if (!ref.image_path.empty())
        j["image_path"] = ref.image_path.string();
    if (ref.labels)
        j["labels"] = volume_to_json(*ref.labels);
    else if (!ref.label_path.empty())
        j["label_path"] = ref.label_path.string();
    return j;
}

CaseRef open_case_from_json(const json& j) {
    CaseRef r;
    try {
        r.case_id = j.at("case_id").get<std::string>();
        r.instance_policy = j.value("instance_policy", r.instance_policy);
        if (j.contains("image")) r.image = volume_from_json(j.at("image"));
        if (j.contains("image_path")) r.image_path = j.at("image_path").get<std::string>();
        if (j.contains("labels")) r.labels = volume_from_json(j.at("labels"));
        if (j.contains("label_path")) r.label_path = j.at("label_path").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad open_case: ") + e.what());
    }
    return r;
}

json predict_to_json(const std::string& session_id, const PredictRequest& r) {
    json prompts = json::array();
    for (const auto& p : r.prompts) prompts.push_back(prompt_to_json(p));
    json j{{"type", "predict"}, {"session_id", session_id}, {"scope", scope_to_json(r.scope)}, {"prompts", prompts}};
    if (r.prev_mask) j["prev_mask"] = mask_to_json(rle_encode(*r.prev_mask));
    return j;
}

PredictRequest predict_from_json(const json& j) {
    PredictRequest r;
    try {
        r.scope = scope_from_json(j.at("scope"));
        for (const auto& p : j.at("prompts")) r.prompts.push_back(prompt_from_json(p));
        if (j.contains("prev_mask") && !j.at("prev_mask").is_null())
            r.prev_mask = rle_decode(mask_from_json(j.at("prev_mask")));
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad predict: ") + e.what());
    }
    return r;
}

ProtocolServer::ProtocolServer(Segmenter& segmenter, std::string name)
    : segmenter_(segmenter), name_(std::move(name)), caps_(segmenter.capabilities()) {}

std::string ProtocolServer::handle(const std::string& line) {
    json req;
    try {
        req = json::parse(line);
    } catch (const json::exception& e) {
        return error_reply(nullptr, wire_error::BadRequest, std::string("not JSON: ") + e.what()).dump();
    }
    const json id = req.is_object() && req.contains("id") ? req["id"] : json();
    auto reply = [&](json r) {
        if (!id.is_null()) r["id"] = id;
        return r.dump();
    };
    if (!req.is_object() || !req.contains("type") || !req["type"].is_string())
        return error_reply(id, wire_error::BadRequest, "request needs a string 'type'").dump();
    const auto type = req["type"].get<std::string>();
    try {
        if (type == "hello")
            return reply({{"type", "capabilities"},
                          {"protocol", kProtocolVersion},
                          {"name", name_},
                          {"capabilities", capabilities_to_json(caps_)}});
        if (type == "open_case") {
            const auto sid = segmenter_.open_case(open_case_from_json(req));
            sessions_.insert(sid);
            return reply({{"type", "ack"}, {"session_id", sid}});
        }
        if (type == "predict" || type == "close") {
            if (!req.contains("session_id") || !req["session_id"].is_string())
                return error_reply(id, wire_error::BadRequest, "missing session_id").dump();
            const auto sid = req["session_id"].get<std::string>();
            if (!sessions_.count(sid))
                return error_reply(id, wire_error::UnknownSession, "session '" + sid + "' is not open").dump();
            if (type == "close") {
                segmenter_.close(sid);
                sessions_.erase(sid);
                return reply({{"type", "ack"}, {"session_id", sid}});
            }
            PredictRequest pr;
            try {
                pr = predict_from_json(req);
            } catch (const Error& e) {
                return error_reply(id, wire_error::BadRequest, e.what()).dump();
            }
            if (const auto bad = capability_violation(caps_, pr); !bad.empty())
                return error_reply(id, wire_error::Unsupported, bad + " is not advertised").dump();
            const auto mask = segmenter_.predict(sid, pr);
            return reply({{"type", "mask"}, {"mask", mask_to_json(rle_encode(mask))}});
        }
        return error_reply(id, wire_error::BadRequest, "unknown request type '" + type + "'").dump();
    } catch (const Error& e) {
        const bool caller = e.code() == Errc::InvalidArgument || e.code() == Errc::DimMismatch ||
                            e.code() == Errc::IoFailure || e.code() == Errc::MalformedHeader ||
                            e.code() == Errc::UnsupportedDtype || e.code() == Errc::TruncatedData;
        return error_reply(id, caller ? wire_error::InvalidRequest : wire_error::Internal, e.what()).dump();
    } catch (const std::exception& e) {
        return error_reply(id, wire_error::Internal, e.what()).dump();
    }
}

ProtocolClient::ProtocolClient(std::unique_ptr<LineTransport> transport) : transport_(std::move(transport)) {
    const auto r = call({{"type", "hello"}, {"protocol", kProtocolVersion}}, "capabilities");
    try {
        caps_ = capabilities_from_json(r.at("capabilities"));
        name_ = r.value("name", std::string());
    } catch (const json::exception& e) {
        throw Error(Errc::ProtocolError, std::string("bad capabilities message: ") + e.what());
    }
}

ProtocolClient::~ProtocolClient() = default;

json ProtocolClient::call(json request, const char* expect) {
    const auto id = next_id_++;
    request["id"] = id;
    transport_->send_line(request.dump());
    const auto line = transport_->recv_line();
    if (!line) throw Error(Errc::SegmenterCrash, "segmenter closed the connection");
    json r;
    try {
        r = json::parse(*line);
    } catch (const json::exception&) {
        throw Error(Errc::ProtocolError, "segmenter sent a non-JSON line");
    }
    if (!r.is_object() || r.value("id", json()) != json(id))
        throw Error(Errc::ProtocolError, "response id does not match request " + std::to_string(id));
    const auto type = r.value("type", std::string());
    if (type == "error")
        throw Error(Errc::SegmenterFailure,
                    r.value("code", std::string("?")) + ": " + r.value("message", std::string()));
    if (type != expect) throw Error(Errc::ProtocolError, "expected '" + std::string(expect) + "', got '" + type + "'");
    return r;
}

std::string ProtocolClient::open_case(const CaseRef& ref) {
    const auto r = call(open_case_to_json(ref), "ack");
    if (!r.contains("session_id") || !r["session_id"].is_string())
        throw Error(Errc::ProtocolError, "ack without session_id");
    return r["session_id"].get<std::string>();
}

BinaryMask ProtocolClient::predict(const std::string& session_id, const PredictRequest& request) {
    const auto r = call(predict_to_json(session_id, request), "mask");
    if (!r.contains("mask")) throw Error(Errc::ProtocolError, "mask response without mask");
    const auto rle = mask_from_json(r["mask"]);
    if (const auto defect = rle_defect(rle); !defect.empty()) throw Error(Errc::ProtocolError, "invalid RLE: " + defect);
    return rle_decode(rle);
}

void ProtocolClient::close(const std::string& session_id) {
    call({{"type", "close"}, {"session_id", session_id}}, "ack");
}

}  // namespace isbench
