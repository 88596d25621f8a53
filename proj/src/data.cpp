#include "cloak/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "cloak/errors.hpp"
#include "cloak/hash.hpp"
#include "cloak/image_io.hpp"
#include "cloak/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cloak {

Viewpoint viewpoint_from_string(const std::string& s) {
    if (s == "frontal") return Viewpoint::kFrontal;
    if (s == "side_back") return Viewpoint::kSideBack;
    if (s == "no_human") return Viewpoint::kNoHuman;
    throw SchemaViolation("unknown viewpoint '" + s + "'");
}

std::string to_string(Viewpoint v) {
    switch (v) {
        case Viewpoint::kFrontal: return "frontal";
        case Viewpoint::kSideBack: return "side_back";
        case Viewpoint::kNoHuman: return "no_human";
    }
    return "no_human";
}

int DatasetManifest::count(Viewpoint v) const {
    int n = 0;
    for (const auto& e : entries) {
        if (e.viewpoint == v) ++n;
    }
    return n;
}

namespace {

BoxTarget box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw SchemaViolation("bbox must be [cx,cy,w,h]");
    BoxTarget b;
    b.cx = j[0].get<double>();
    b.cy = j[1].get<double>();
    b.w = j[2].get<double>();
    b.h = j[3].get<double>();
    return b;
}

json box_to_json(const BoxTarget& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

void validate_entry(const AnnotatedImage& e) {
    for (const auto& b : e.person_boxes) {
        if (b.w <= 0 || b.h <= 0) throw SchemaViolation("person box has non-positive size");
        if (b.cx - b.w / 2 < -1e-9 || b.cx + b.w / 2 > 1 + 1e-9 || b.cy - b.h / 2 < -1e-9 ||
            b.cy + b.h / 2 > 1 + 1e-9) {
            throw SchemaViolation("person box outside image bounds");
        }
    }
    for (const auto& g : e.garments) {
        if (g.keypoints.size() < 3) throw SchemaViolation("garment needs >= 3 keypoints");
        if (!polygon_is_simple(g.keypoints)) {
            throw SchemaViolation("garment keypoints self-intersect");
        }
        if (g.corner_labels) {
            for (int idx : *g.corner_labels) {
                if (idx < 0 || idx >= static_cast<int>(g.keypoints.size())) {
                    throw SchemaViolation("corner label index out of range");
                }
            }
        }
    }
    if (e.viewpoint == Viewpoint::kNoHuman && !e.person_boxes.empty()) {
        throw SchemaViolation("viewpoint no_human but person boxes present");
    }
    if (e.viewpoint != Viewpoint::kNoHuman && e.person_boxes.empty()) {
        throw SchemaViolation("person viewpoint but no person boxes");
    }
}

}  // namespace

DatasetManifest load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw MissingImageFile("manifest not found: " + manifest_path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw SchemaViolation(std::string("manifest is not valid JSON: ") + e.what());
    }

    DatasetManifest m;
    m.split = root.value("split", "train");
    if (m.split != "train" && m.split != "val") {
        throw SchemaViolation("split must be 'train' or 'val'");
    }
    if (!root.contains("images") || !root["images"].is_array()) {
        throw SchemaViolation("manifest needs an 'images' array");
    }

    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<std::string> problems;

    for (size_t i = 0; i < root["images"].size(); ++i) {
        const json& je = root["images"][i];
        try {
            AnnotatedImage e;
            e.path = je.at("path").get<std::string>();
            fs::path img_path = base / e.path;
            if (!fs::exists(img_path)) {
                throw MissingImageFile("image file missing: " + img_path.string());
            }
            e.image = read_png(img_path.string());
            for (const auto& jp : je.value("persons", json::array())) {
                e.person_boxes.push_back(box_from_json(jp.at("bbox")));
            }
            for (const auto& jd : je.value("distractors", json::array())) {
                e.distractor_boxes.push_back(box_from_json(jd.at("bbox")));
            }
            for (const auto& jg : je.value("garments", json::array())) {
                GarmentAnnotation g;
                for (const auto& jk : jg.at("keypoints")) {
                    if (!jk.is_array() || jk.size() != 2) {
                        throw SchemaViolation("keypoint must be [x,y]");
                    }
                    g.keypoints.push_back({jk[0].get<double>(), jk[1].get<double>()});
                }
                if (jg.contains("corner_labels")) {
                    const auto& jl = jg["corner_labels"];
                    if (!jl.is_array() || jl.size() != 4) {
                        throw SchemaViolation("corner_labels must have 4 indices");
                    }
                    g.corner_labels = std::array<int, 4>{jl[0].get<int>(), jl[1].get<int>(),
                                                         jl[2].get<int>(), jl[3].get<int>()};
                }
                e.garments.push_back(std::move(g));
            }
            e.viewpoint = viewpoint_from_string(je.value("viewpoint", "no_human"));
            validate_entry(e);
            m.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            std::ostringstream os;
            os << "entry " << i;
            if (je.contains("path") && je["path"].is_string()) {
                os << " (" << je["path"].get<std::string>() << ")";
            }
            os << ": " << ex.what();
            problems.push_back(os.str());
        }
    }

    if (!problems.empty()) {
        std::ostringstream os;
        os << problems.size() << " invalid manifest entr" << (problems.size() == 1 ? "y" : "ies");
        for (const auto& p : problems) os << "\n  " << p;
        throw SchemaViolation(os.str());
    }
    return m;
}

void save_dataset(const DatasetManifest& manifest, const std::string& dir,
                  const std::string& manifest_name) {
    fs::create_directories(fs::path(dir) / "images");
    json root;
    root["split"] = manifest.split;
    root["images"] = json::array();

    char name[32];
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        std::snprintf(name, sizeof(name), "images/%05zu.png", i);
        std::string rel = e.path.empty() ? name : e.path;
        write_png(e.image, (fs::path(dir) / rel).string());

        json je;
        je["path"] = rel;
        je["persons"] = json::array();
        for (const auto& b : e.person_boxes) je["persons"].push_back({{"bbox", box_to_json(b)}});
        if (!e.distractor_boxes.empty()) {
            je["distractors"] = json::array();
            for (const auto& b : e.distractor_boxes) {
                je["distractors"].push_back({{"bbox", box_to_json(b)}});
            }
        }
        je["garments"] = json::array();
        for (const auto& g : e.garments) {
            json jg;
            jg["keypoints"] = json::array();
            for (const auto& k : g.keypoints) jg["keypoints"].push_back({k.x, k.y});
            if (g.corner_labels) {
                jg["corner_labels"] = {(*g.corner_labels)[0], (*g.corner_labels)[1],
                                       (*g.corner_labels)[2], (*g.corner_labels)[3]};
            }
            je["garments"].push_back(std::move(jg));
        }
        je["viewpoint"] = to_string(e.viewpoint);
        root["images"].push_back(std::move(je));
    }

    std::ofstream out(fs::path(dir) / manifest_name);
    if (!out) throw IoFailure("cannot write manifest under " + dir);
    out << root.dump(2) << "\n";
}

Quad keypoints_to_quad(const std::vector<Vec2>& keypoints,
                       const std::optional<std::array<int, 4>>& corner_labels) {
    if (keypoints.size() < 4) throw DegeneratePolygon("need at least 4 keypoints");
    if (std::abs(polygon_area(keypoints)) < 1e-9) throw DegeneratePolygon("keypoints have zero area");
    if (!polygon_is_simple(keypoints)) throw DegeneratePolygon("keypoints self-intersect");

    Quad q;
    if (corner_labels) {
        for (int i = 0; i < 4; ++i) {
            int idx = (*corner_labels)[static_cast<size_t>(i)];
            if (idx < 0 || idx >= static_cast<int>(keypoints.size())) {
                throw DegeneratePolygon("corner label out of range");
            }
            q.points[static_cast<size_t>(i)] = keypoints[static_cast<size_t>(idx)];
        }
    } else {
        std::array<Vec2, 4> obb = min_area_obb(keypoints);
        for (int i = 0; i < 4; ++i) {
            double best = std::numeric_limits<double>::max();
            Vec2 pick = keypoints[0];
            for (const auto& k : keypoints) {
                Vec2 d = k - obb[static_cast<size_t>(i)];
                double dist = d.x * d.x + d.y * d.y;
                if (dist < best) {
                    best = dist;
                    pick = k;
                }
            }
            q.points[static_cast<size_t>(i)] = pick;
        }
    }
    if (!quad_is_valid(q)) throw DegeneratePolygon("selected anchors are degenerate");
    return q;
}

// --- Synthetic scenes ----------------------------------------------------------

namespace {

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    double c = v * s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c; g = x;
    } else if (hp < 2) {
        r = x; g = c;
    } else if (hp < 3) {
        g = c; b = x;
    } else if (hp < 4) {
        g = x; b = c;
    } else if (hp < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    double m = v - c;
    return {r + m, g + m, b + m};
}

struct PersonSpec {
    Vec2 center;
    double bw, bh;      // body rectangle size
    double angle;       // radians
    double head_r;
    Vec2 head_center;
    std::array<Vec2, 4> garment;  // image coords, shoulder-left first
    Rgb limb, hair;
    int style;  // 0 solid, 1 checker, 2 stripes, 3 noise
    Rgb shirt_a, shirt_b;
    double aabb_x0, aabb_y0, aabb_x1, aabb_y1;
};

Vec2 rotate(const Vec2& v, double a) {
    double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

void extend_aabb(PersonSpec& p, const Vec2& v) {
    p.aabb_x0 = std::min(p.aabb_x0, v.x);
    p.aabb_y0 = std::min(p.aabb_y0, v.y);
    p.aabb_x1 = std::max(p.aabb_x1, v.x);
    p.aabb_y1 = std::max(p.aabb_y1, v.y);
}

bool inside_rect(const Vec2& p, const Vec2& center, double w, double h, double angle) {
    Vec2 q = rotate(p - center, -angle);
    return std::abs(q.x) <= w / 2 && std::abs(q.y) <= h / 2;
}

}  // namespace

AnnotatedImage synth_scene(uint64_t seed, const SynthConfig& cfg) {
    Rng rng(mix64(seed, 0x5ce9eULL));
    const int n = cfg.image_size;

    AnnotatedImage out;
    out.image = Image(n, n, 3);

    // Desaturated background with a gentle gradient.
    double base = rng.uniform(0.35, 0.75);
    double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
    double tint[3] = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03)};
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double v = base + gx * (static_cast<double>(x) / n - 0.5) +
                       gy * (static_cast<double>(y) / n - 0.5);
            for (int ch = 0; ch < 3; ++ch) {
                out.image.at(y, x, ch) = std::clamp(v + tint[ch], 0.0, 1.0);
            }
        }
    }

    // Distractors: plain shapes with no head/garment structure.
    int n_distract = rng.uniform_int(0, cfg.max_distractors);
    for (int d = 0; d < n_distract; ++d) {
        bool disc = rng.uniform() < 0.5;
        double cx = rng.uniform(10, n - 10.0), cy = rng.uniform(10, n - 10.0);
        double sw = rng.uniform(10, 28), sh = disc ? sw : rng.uniform(10, 28);
        Rgb col = hsv_to_rgb(rng.uniform(), rng.uniform(0.2, 1.0), rng.uniform(0.25, 0.95));
        int x0 = n, y0 = n, x1 = -1, y1 = -1;
        for (int y = std::max(0, static_cast<int>(cy - sh)); y < std::min(n, static_cast<int>(cy + sh) + 1); ++y) {
            for (int x = std::max(0, static_cast<int>(cx - sw)); x < std::min(n, static_cast<int>(cx + sw) + 1); ++x) {
                Vec2 p{x + 0.5, y + 0.5};
                bool in = disc ? (std::hypot(p.x - cx, p.y - cy) <= sw / 2)
                               : (std::abs(p.x - cx) <= sw / 2 && std::abs(p.y - cy) <= sh / 2);
                if (in) {
                    out.image.at(y, x, 0) = col.r;
                    out.image.at(y, x, 1) = col.g;
                    out.image.at(y, x, 2) = col.b;
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
            }
        }
        if (x1 >= x0) {
            BoxTarget b;
            b.cx = (x0 + x1 + 1.0) / 2.0 / n;
            b.cy = (y0 + y1 + 1.0) / 2.0 / n;
            b.w = (x1 + 1.0 - x0) / n;
            b.h = (y1 + 1.0 - y0) / n;
            out.distractor_boxes.push_back(b);
        }
    }

    // Place persons with non-overlapping extents and well-separated centers.
    int want = rng.uniform_int(cfg.min_persons, cfg.max_persons);
    std::vector<PersonSpec> persons;
    const double rot_max = cfg.max_rotation_deg * 3.14159265358979323846 / 180.0;
    for (int k = 0; k < want; ++k) {
        for (int attempt = 0; attempt < 60; ++attempt) {
            PersonSpec p;
            p.bh = rng.uniform(cfg.min_body_height, cfg.max_body_height);
            p.bw = p.bh * rng.uniform(0.38, 0.55);
            p.angle = rng.uniform(-rot_max, rot_max);
            p.head_r = p.bw * rng.uniform(0.28, 0.38);
            p.center = {rng.uniform(0.15 * n, 0.85 * n), rng.uniform(0.2 * n, 0.8 * n)};
            p.head_center = p.center + rotate({0, -(p.bh / 2 + p.head_r * 0.9)}, p.angle);

            p.aabb_x0 = p.aabb_y0 = 1e9;
            p.aabb_x1 = p.aabb_y1 = -1e9;
            for (int sx = -1; sx <= 1; sx += 2) {
                for (int sy = -1; sy <= 1; sy += 2) {
                    extend_aabb(p, p.center + rotate({sx * p.bw / 2, sy * p.bh / 2}, p.angle));
                }
            }
            extend_aabb(p, {p.head_center.x - p.head_r, p.head_center.y - p.head_r});
            extend_aabb(p, {p.head_center.x + p.head_r, p.head_center.y + p.head_r});

            if (p.aabb_x0 < 2 || p.aabb_y0 < 2 || p.aabb_x1 > n - 2 || p.aabb_y1 > n - 2) continue;
            bool clash = false;
            for (const auto& q : persons) {
                double cdist = std::hypot(q.center.x - p.center.x, q.center.y - p.center.y);
                bool overlap = !(p.aabb_x1 + 3 < q.aabb_x0 || q.aabb_x1 + 3 < p.aabb_x0 ||
                                 p.aabb_y1 + 3 < q.aabb_y0 || q.aabb_y1 + 3 < p.aabb_y0);
                if (cdist < 26.0 || overlap) {
                    clash = true;
                    break;
                }
            }
            if (clash) continue;

            // Garment quad in body frame: shoulders to mid-body, inset at the sides.
            double gx0 = -0.42 * p.bw, gx1 = 0.42 * p.bw;
            double gy0 = -0.44 * p.bh, gy1 = 0.04 * p.bh;
            std::array<Vec2, 4> local{Vec2{gx0, gy0}, Vec2{gx1, gy0}, Vec2{gx1, gy1},
                                      Vec2{gx0, gy1}};
            for (auto& v : local) {
                v.x += rng.uniform(-cfg.garment_jitter, cfg.garment_jitter) * p.bw;
                v.y += rng.uniform(-cfg.garment_jitter, cfg.garment_jitter) * p.bh;
            }
            for (int i = 0; i < 4; ++i) {
                p.garment[static_cast<size_t>(i)] = p.center + rotate(local[static_cast<size_t>(i)], p.angle);
            }

            const Rgb skin_tones[] = {{0.87, 0.72, 0.6}, {0.72, 0.55, 0.42}, {0.5, 0.36, 0.27}};
            p.limb = skin_tones[rng.uniform_int(0, 2)];
            p.hair = rng.uniform() < 0.5 ? Rgb{0.15, 0.12, 0.1} : p.limb;
            p.style = rng.uniform_int(0, 3);
            p.shirt_a = hsv_to_rgb(rng.uniform(), rng.uniform(0.6, 1.0), rng.uniform(0.55, 0.95));
            p.shirt_b = hsv_to_rgb(rng.uniform(), rng.uniform(0.6, 1.0), rng.uniform(0.55, 0.95));
            persons.push_back(p);
            break;
        }
    }

    int side_back = 0;
    for (auto& p : persons) {
        std::vector<Vec2> quad(p.garment.begin(), p.garment.end());
        int px0 = n, py0 = n, px1 = -1, py1 = -1;
        int y_lo = std::max(0, static_cast<int>(std::floor(p.aabb_y0)) - 1);
        int y_hi = std::min(n, static_cast<int>(std::ceil(p.aabb_y1)) + 1);
        int x_lo = std::max(0, static_cast<int>(std::floor(p.aabb_x0)) - 1);
        int x_hi = std::min(n, static_cast<int>(std::ceil(p.aabb_x1)) + 1);
        for (int y = y_lo; y < y_hi; ++y) {
            for (int x = x_lo; x < x_hi; ++x) {
                Vec2 pt{x + 0.5, y + 0.5};
                bool in_body = inside_rect(pt, p.center, p.bw, p.bh, p.angle);
                bool in_head = std::hypot(pt.x - p.head_center.x, pt.y - p.head_center.y) <= p.head_r;
                if (!in_body && !in_head) continue;

                Rgb col = in_head ? p.hair : p.limb;
                if (in_body && point_in_polygon_even_odd(pt, quad)) {
                    Vec2 q = rotate(pt - p.center, -p.angle);
                    switch (p.style) {
                        case 0:
                            col = p.shirt_a;
                            break;
                        case 1: {
                            int cell = (static_cast<int>(std::floor(q.x / 5)) +
                                        static_cast<int>(std::floor(q.y / 5))) & 1;
                            col = cell ? p.shirt_a : p.shirt_b;
                            break;
                        }
                        case 2: {
                            int band = static_cast<int>(std::floor(q.y / 4)) & 1;
                            col = band ? p.shirt_a : p.shirt_b;
                            break;
                        }
                        default: {
                            double t = rng.uniform();
                            col = {p.shirt_a.r * (1 - t) + p.shirt_b.r * t,
                                   p.shirt_a.g * (1 - t) + p.shirt_b.g * t,
                                   p.shirt_a.b * (1 - t) + p.shirt_b.b * t};
                            break;
                        }
                    }
                }
                out.image.at(y, x, 0) = std::clamp(col.r, 0.0, 1.0);
                out.image.at(y, x, 1) = std::clamp(col.g, 0.0, 1.0);
                out.image.at(y, x, 2) = std::clamp(col.b, 0.0, 1.0);
                px0 = std::min(px0, x);
                py0 = std::min(py0, y);
                px1 = std::max(px1, x);
                py1 = std::max(py1, y);
            }
        }

        BoxTarget b;
        b.cx = (px0 + px1 + 1.0) / 2.0 / n;
        b.cy = (py0 + py1 + 1.0) / 2.0 / n;
        b.w = (px1 + 1.0 - px0) / n;
        b.h = (py1 + 1.0 - py0) / n;
        out.person_boxes.push_back(b);

        // 16-point outline: each edge gets its corner plus 3 interior points.
        GarmentAnnotation g;
        for (int e = 0; e < 4; ++e) {
            Vec2 a = p.garment[static_cast<size_t>(e)];
            Vec2 bpt = p.garment[static_cast<size_t>((e + 1) % 4)];
            for (int s = 0; s < 4; ++s) {
                double t = s / 4.0;
                g.keypoints.push_back({a.x + (bpt.x - a.x) * t, a.y + (bpt.y - a.y) * t});
            }
        }
        if (cfg.emit_corner_labels) g.corner_labels = std::array<int, 4>{0, 4, 8, 12};
        out.garments.push_back(std::move(g));

        if (std::abs(p.angle) > 30.0 * 3.14159265358979323846 / 180.0) ++side_back;
    }

    out.viewpoint = persons.empty() ? Viewpoint::kNoHuman
                                    : (side_back > 0 ? Viewpoint::kSideBack : Viewpoint::kFrontal);
    return out;
}

DatasetManifest make_synth_dataset(const std::string& split, int count, uint64_t base_seed,
                                   const SynthConfig& config) {
    DatasetManifest m;
    m.split = split;
    uint64_t split_tag = hash_bytes(split.data(), split.size());
    m.entries.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        m.entries.push_back(synth_scene(mix64(base_seed ^ split_tag, static_cast<uint64_t>(i)), config));
    }
    return m;
}

}  // namespace cloak
