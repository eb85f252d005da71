#include "isbench/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "isbench/error.hpp"
#include "isbench/image_io.hpp"
#include "isbench/rng.hpp"

namespace isbench {

using nlohmann::json;

namespace {

const std::array<std::pair<OracleKind, const char*>, 6> kKindNames{{
    {OracleKind::Perfect, "perfect"},
    {OracleKind::Dilated, "dilated"},
    {OracleKind::Eroded, "eroded"},
    {OracleKind::Correctable, "correctable"},
    {OracleKind::FloodFill, "flood_fill"},
    {OracleKind::ConstantEmpty, "constant_empty"},
}};

BinaryMask crop(const BinaryMask& m, const Scope& s) {
    return s.volume ? m : as_volume(extract_slice(m, s.axis, s.index));
}

int along(const Index3& q, Axis axis) { return axis == Axis::X ? q.x : axis == Axis::Y ? q.y : q.z; }

bool in_scope(const Scope& s, const Index3& q) { return s.volume || along(q, s.axis) == s.index; }

void validate(const Dims& d, const PredictRequest& r) {
    if (!r.scope.volume && (r.scope.index < 0 || r.scope.index >= axis_length(d, r.scope.axis)))
        throw Error(Errc::InvalidArgument, "slice index out of range");
    for (const auto& p : r.prompts) {
        if (p.is_point() && !d.contains(p.point)) throw Error(Errc::InvalidArgument, "point prompt outside the volume");
        if (p.kind == PromptKind::Box3D && !(d.contains({p.box3.min.x, p.box3.min.y, p.box3.min.z}) &&
                                             d.contains({p.box3.max.x, p.box3.max.y, p.box3.max.z})))
            throw Error(Errc::InvalidArgument, "box prompt outside the volume");
    }
    if (r.prev_mask && !(r.prev_mask->dims() == r.scope.mask_dims(d)))
        throw Error(Errc::DimMismatch, "previous mask dims do not match the scope");
}

bool inside_box2(const Box2& b, const Pixel& p) {
    return p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y;
}

bool inside_box3(const Box3& b, const Index3& q) {
    return q.x >= b.min.x && q.x <= b.max.x && q.y >= b.min.y && q.y <= b.max.y && q.z >= b.min.z &&
           q.z <= b.max.z;
}

BinaryMask morph(const BinaryMask& gt, const Scope& s, int k, bool grow) {
    if (s.volume) return grow ? dilate(gt, k) : erode(gt, k);
    const auto slice = extract_slice(gt, s.axis, s.index);
    return as_volume(grow ? dilate(slice, k) : erode(slice, k));
}

}  // namespace

std::string oracle_kind_name(OracleKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "perfect";
}

OracleKind parse_oracle_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (name == n) return k;
    throw Error(Errc::InvalidArgument, "unknown oracle kind '" + std::string(name) + "'");
}

json oracle_spec_to_json(const OracleSpec& s) {
    return json{{"kind", oracle_kind_name(s.kind)}, {"mode", s.volumetric ? "3d" : "2d"},
                {"k", s.k},
                {"radius", s.radius},
                {"threshold", s.threshold},
                {"seed", s.seed}};
}

OracleSpec oracle_spec_from_json(const json& j) {
    OracleSpec s;
    try {
        s.kind = parse_oracle_kind(j.at("kind").get<std::string>());
        const auto mode = j.value("mode", std::string("2d"));
        if (mode != "2d" && mode != "3d") throw Error(Errc::InvalidArgument, "oracle mode must be 2d or 3d");
        s.volumetric = mode == "3d";
        s.k = j.value("k", 1);
        s.radius = j.value("radius", 2);
        s.threshold = j.value("threshold", 0.0);
        s.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad oracle spec: ") + e.what());
    }
    if ((s.kind == OracleKind::Dilated || s.kind == OracleKind::Eroded) && s.k < 1)
        throw Error(Errc::InvalidArgument, "oracle k must be >= 1");
    if (s.kind == OracleKind::Correctable && s.radius < 1) throw Error(Errc::InvalidArgument, "oracle radius must be >= 1");
    if (!std::isfinite(s.threshold)) throw Error(Errc::InvalidArgument, "oracle threshold must be finite");
    return s;
}

Capabilities oracle_capabilities(const OracleSpec& s) {
    return {!s.volumetric, s.volumetric, true, true, true, true};
}

OracleSegmenter::OracleSegmenter(OracleSpec spec) : spec_(spec) {}

Capabilities OracleSegmenter::capabilities() { return oracle_capabilities(spec_); }

std::string OracleSegmenter::open_case(const CaseRef& ref) {
    Session s;
    const Volume labels = ref.labels ? *ref.labels : read_volume(ref.label_path);
    s.dims = labels.dims();
    s.instances = extract_instances(labels, parse_instance_policy(ref.instance_policy));
    s.ids = instance_map(s.dims, s.instances);
    if (spec_.kind == OracleKind::FloodFill) {
        if (ref.image)
            s.image = *ref.image;
        else if (!ref.image_path.empty())
            s.image = read_volume(ref.image_path);
        else
            throw Error(Errc::InvalidArgument, "flood_fill oracle needs the image");
        if (!(s.image->dims() == s.dims)) throw Error(Errc::DimMismatch, "image and label dims differ");
    }
    const auto id = "oracle-" + std::to_string(next_session_++);
    sessions_.emplace(id, std::move(s));
    return id;
}

void OracleSegmenter::close(const std::string& session_id) {
    if (sessions_.erase(session_id) == 0) throw Error(Errc::InvalidArgument, "unknown session '" + session_id + "'");
}

int OracleSegmenter::identify(Session& s, const PredictRequest& r) const {
    for (const auto& p : r.prompts)
        if (p.kind == PromptKind::PosPoint && s.ids[s.dims.linear(p.point)] > 0) return s.ids[s.dims.linear(p.point)];

    // Instance with the most voxels among those `visit` reports.
    auto best_of = [&](auto&& visit) {
        std::vector<std::size_t> hits(s.instances.size() + 1, 0);
        visit([&](const Index3& q) {
            if (s.dims.contains(q)) ++hits[static_cast<std::size_t>(s.ids[s.dims.linear(q)])];
        });
        int best = 0;
        std::size_t most = 0;
        for (std::size_t id = 1; id < hits.size(); ++id)
            if (hits[id] > most) {
                most = hits[id];
                best = static_cast<int>(id);
            }
        return best;
    };
    for (const auto& p : r.prompts) {
        int id = 0;
        if (p.kind == PromptKind::Box3D)
            id = best_of([&](auto&& hit) {
                for (int z = p.box3.min.z; z <= p.box3.max.z; ++z)
                    for (int y = p.box3.min.y; y <= p.box3.max.y; ++y)
                        for (int x = p.box3.min.x; x <= p.box3.max.x; ++x) hit(Index3{x, y, z});
            });
        if (p.kind == PromptKind::Box2D && !r.scope.volume)
            id = best_of([&](auto&& hit) {
                for (int v = p.box2.min.y; v <= p.box2.max.y; ++v)
                    for (int u = p.box2.min.x; u <= p.box2.max.x; ++u)
                        hit(slice_to_volume(r.scope.axis, r.scope.index, {u, v}));
            });
        if (id > 0) return id;
    }
    if (r.prev_mask) {
        const auto& m = *r.prev_mask;
        const auto id = best_of([&](auto&& hit) {
            for (std::size_t i = 0; i < m.dims().voxel_count(); ++i) {
                if (!m.test(i)) continue;
                const auto q = m.dims().coords(i);
                hit(r.scope.volume ? q : slice_to_volume(r.scope.axis, r.scope.index, {q.x, q.y}));
            }
        });
        if (id > 0) return id;
    }
    return s.last_target;
}

BinaryMask& OracleSegmenter::belief(Session& s, int target) const {
    auto it = s.beliefs.find(target);
    if (it != s.beliefs.end()) return it->second;
    const auto& gt = s.instances[static_cast<std::size_t>(target - 1)].mask;
    BinaryMask start(s.dims);
    if (spec_.volumetric) {
        start = dilate(gt, 1);
    } else {
        for (int z = 0; z < s.dims.nz; ++z) insert_slice(start, Axis::Z, z, dilate(extract_slice(gt, Axis::Z, z), 1));
    }
    return s.beliefs.emplace(target, std::move(start)).first->second;
}

BinaryMask OracleSegmenter::flood(const Session& s, const PredictRequest& r) const {
    const auto& d = s.dims;
    const auto& img = *s.image;
    std::vector<Index3> seeds;
    std::vector<std::uint8_t> blocked(d.voxel_count(), 0);
    const Box2* box2 = nullptr;
    const Box3* box3 = nullptr;
    for (const auto& p : r.prompts) {
        if (p.kind == PromptKind::PosPoint && in_scope(r.scope, p.point)) seeds.push_back(p.point);
        if (p.kind == PromptKind::NegPoint) blocked[d.linear(p.point)] = 1;
        if (p.kind == PromptKind::Box2D) box2 = &p.box2;
        if (p.kind == PromptKind::Box3D) box3 = &p.box3;
    }
    auto allowed = [&](const Index3& q) {
        if (!d.contains(q) || !in_scope(r.scope, q) || blocked[d.linear(q)]) return false;
        if (box3 && !inside_box3(*box3, q)) return false;
        if (box2 && !r.scope.volume && !inside_box2(*box2, volume_to_slice(r.scope.axis, q))) return false;
        return true;
    };
    if (seeds.empty()) {
        if (box3) seeds.push_back({(box3->min.x + box3->max.x) / 2, (box3->min.y + box3->max.y) / 2,
                                   (box3->min.z + box3->max.z) / 2});
        else if (box2 && !r.scope.volume)
            seeds.push_back(slice_to_volume(r.scope.axis, r.scope.index,
                                            {(box2->min.x + box2->max.x) / 2, (box2->min.y + box2->max.y) / 2}));
        else if (r.prev_mask)
            return *r.prev_mask;
        else
            return BinaryMask(r.scope.mask_dims(d));
    }
    BinaryMask grown(d);
    std::vector<Index3> stack;
    constexpr std::array<std::array<int, 3>, 6> steps{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
    for (const auto& seed : seeds) {
        if (!allowed(seed) || grown.test(seed)) continue;
        const float ref = img.at(seed);
        std::vector<std::uint8_t> seen(d.voxel_count(), 0);
        stack.assign(1, seed);
        seen[d.linear(seed)] = 1;
        while (!stack.empty()) {
            const auto q = stack.back();
            stack.pop_back();
            grown.set(q);
            for (const auto& st : steps) {
                const Index3 n{q.x + st[0], q.y + st[1], q.z + st[2]};
                if (!allowed(n) || seen[d.linear(n)]) continue;
                seen[d.linear(n)] = 1;
                if (std::abs(static_cast<double>(img.at(n)) - ref) <= spec_.threshold) stack.push_back(n);
            }
        }
    }
    return crop(grown, r.scope);
}

BinaryMask OracleSegmenter::predict(const std::string& session_id, const PredictRequest& r) {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(Errc::InvalidArgument, "unknown session '" + session_id + "'");
    auto& s = it->second;
    validate(s.dims, r);
    if (spec_.kind == OracleKind::ConstantEmpty) return BinaryMask(r.scope.mask_dims(s.dims));
    if (spec_.kind == OracleKind::FloodFill) return flood(s, r);

    const int target = identify(s, r);
    if (target == 0) return BinaryMask(r.scope.mask_dims(s.dims));
    s.last_target = target;
    const auto& gt = s.instances[static_cast<std::size_t>(target - 1)].mask;
    switch (spec_.kind) {
        case OracleKind::Dilated: return morph(gt, r.scope, spec_.k, true);
        case OracleKind::Eroded: return morph(gt, r.scope, spec_.k, false);
        case OracleKind::Correctable: {
            auto& b = belief(s, target);
            if (r.prev_mask) {
                const int rad = spec_.radius;
                for (const auto& p : r.prompts) {
                    if (!p.is_point()) continue;
                    for (int dz = -rad; dz <= rad; ++dz)
                        for (int dy = -rad; dy <= rad; ++dy)
                            for (int dx = -rad; dx <= rad; ++dx) {
                                const Index3 q{p.point.x + dx, p.point.y + dy, p.point.z + dz};
                                if (!s.dims.contains(q)) continue;
                                // 2D scope: stay in the prompt's plane.
                                if (!r.scope.volume && along(q, r.scope.axis) != along(p.point, r.scope.axis))
                                    continue;
                                b.set(q, gt.test(q));
                            }
                }
            }
            return crop(b, r.scope);
        }
        default: return crop(gt, r.scope);
    }
}

SyntheticCase generate_synthetic_case(const SyntheticCaseSpec& spec) {
    const auto& d = spec.dims;
    if (!d.valid()) throw Error(Errc::InvalidArgument, "synthetic dims must be positive");
    if (spec.instances < 1 || spec.instances > 255) throw Error(Errc::InvalidArgument, "instances must be in 1..255");
    if (spec.radius_min < 1 || spec.radius_max < spec.radius_min)
        throw Error(Errc::InvalidArgument, "radius range must satisfy 1 <= min <= max");
    SeededRng rng(spec.seed, "synth/" + spec.case_id);
    SyntheticCase out;
    struct Bounds {
        Index3 lo, hi;
    };
    std::vector<Bounds> placed;
    constexpr int kTries = 1000;
    for (int i = 0; i < spec.instances; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < kTries && !ok; ++attempt) {
            const Index3 r{static_cast<int>(rng.uniform_int(spec.radius_min, spec.radius_max)),
                           static_cast<int>(rng.uniform_int(spec.radius_min, spec.radius_max)),
                           static_cast<int>(rng.uniform_int(spec.radius_min, spec.radius_max))};
            if (2 * r.x + 1 > d.nx || 2 * r.y + 1 > d.ny || 2 * r.z + 1 > d.nz) continue;
            const Index3 c{static_cast<int>(rng.uniform_int(r.x, d.nx - 1 - r.x)),
                           static_cast<int>(rng.uniform_int(r.y, d.ny - 1 - r.y)),
                           static_cast<int>(rng.uniform_int(r.z, d.nz - 1 - r.z))};
            const Bounds b{{c.x - r.x, c.y - r.y, c.z - r.z}, {c.x + r.x, c.y + r.y, c.z + r.z}};
            // A one-voxel gap keeps instances apart under 26-connectivity.
            const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Bounds& o) {
                return b.lo.x > o.hi.x + 1 || o.lo.x > b.hi.x + 1 || b.lo.y > o.hi.y + 1 || o.lo.y > b.hi.y + 1 ||
                       b.lo.z > o.hi.z + 1 || o.lo.z > b.hi.z + 1;
            });
            if (!clear) continue;
            placed.push_back(b);
            out.centres.push_back(c);
            out.radii.push_back(r);
            ok = true;
        }
        if (!ok)
            throw Error(Errc::PlacementFailure,
                        "could not place instance " + std::to_string(i + 1) + " in " + spec.case_id);
    }

    std::vector<float> labels(d.voxel_count(), 0.0f);
    for (std::size_t i = 0; i < out.centres.size(); ++i) {
        const auto& c = out.centres[i];
        const auto& r = out.radii[i];
        const long rx2 = static_cast<long>(r.x) * r.x, ry2 = static_cast<long>(r.y) * r.y,
                   rz2 = static_cast<long>(r.z) * r.z;
        BinaryMask m(d);
        for (int z = c.z - r.z; z <= c.z + r.z; ++z)
            for (int y = c.y - r.y; y <= c.y + r.y; ++y)
                for (int x = c.x - r.x; x <= c.x + r.x; ++x) {
                    const long dx = x - c.x, dy = y - c.y, dz = z - c.z;
                    if (dx * dx * ry2 * rz2 + dy * dy * rx2 * rz2 + dz * dz * rx2 * ry2 > rx2 * ry2 * rz2) continue;
                    m.set(Index3{x, y, z});
                    labels[d.linear({x, y, z})] = static_cast<float>(i + 1);
                }
        out.instances.push_back(std::move(m));
    }
    std::vector<float> image(d.voxel_count());
    auto noise = rng.child("noise");
    for (std::size_t i = 0; i < image.size(); ++i)
        image[i] = static_cast<float>(spec.background + (labels[i] > 0 ? spec.contrast : 0.0) +
                                      spec.noise_sigma * noise.gaussian());
    out.image = Volume(d, {}, DType::Float32, std::move(image));
    out.labels = Volume(d, {}, DType::UInt8, std::move(labels));
    return out;
}

SyntheticDatasetSpec synthetic_dataset_spec_from_json(const json& j) {
    SyntheticDatasetSpec s;
    try {
        s.dataset_id = j.value("dataset_id", s.dataset_id);
        s.cases = j.value("cases", s.cases);
        s.dim_min = j.value("dim_min", s.dim_min);
        s.dim_max = j.value("dim_max", s.dim_max);
        auto& b = s.base;
        b.instances = j.value("instances", b.instances);
        b.radius_min = j.value("radius_min", b.radius_min);
        b.radius_max = j.value("radius_max", b.radius_max);
        b.background = j.value("background", b.background);
        b.contrast = j.value("contrast", b.contrast);
        b.noise_sigma = j.value("noise_sigma", b.noise_sigma);
        b.seed = j.value("seed", b.seed);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad synthetic spec: ") + e.what());
    }
    if (s.cases < 1 || s.dim_min < 1 || s.dim_max < s.dim_min)
        throw Error(Errc::InvalidArgument, "synthetic spec needs cases >= 1 and 1 <= dim_min <= dim_max");
    return s;
}

json write_synthetic_dataset(const SyntheticDatasetSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    SeededRng dims_rng(spec.base.seed, "synth/" + spec.dataset_id + "/dims");
    json cases = json::array();
    for (int c = 0; c < spec.cases; ++c) {
        char id[32];
        std::snprintf(id, sizeof id, "case%03d", c);
        auto cs = spec.base;
        cs.case_id = id;
        const int side = static_cast<int>(dims_rng.uniform_int(spec.dim_min, spec.dim_max));
        cs.dims = {side, side, side};
        const auto sc = generate_synthetic_case(cs);
        const std::string image = std::string(id) + "_image.nii.gz";
        const std::string label = std::string(id) + "_labels.nii.gz";
        write_volume(sc.image, dir / image);
        write_volume(sc.labels, dir / label);
        json class_map = json::object();
        for (std::size_t i = 0; i < sc.instances.size(); ++i) class_map[std::to_string(i + 1)] = "ellipsoid";
        cases.push_back({{"case_id", id},
                         {"image_path", image},
                         {"label_path", label},
                         {"class_map", class_map},
                         {"instance_policy", "explicit_labels"}});
    }
    json manifest{{"dataset_id", spec.dataset_id}, {"cases", cases}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error(Errc::IoFailure, "cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
    return manifest;
}

}  // namespace isbench
