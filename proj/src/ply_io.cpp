#include "splat/ply_io.hpp"

#include "splat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace splat {

namespace {

enum class PlyType { Float32, Float64, UChar, Int32, UInt32, Int16, UInt16, Char };

std::size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::Float32: return 4;
        case PlyType::Float64: return 8;
        case PlyType::UChar: return 1;
        case PlyType::Char: return 1;
        case PlyType::Int16: return 2;
        case PlyType::UInt16: return 2;
        case PlyType::Int32: return 4;
        case PlyType::UInt32: return 4;
    }
    return 0;
}

PlyType parse_type(const std::string& name, const std::filesystem::path& path) {
    if (name == "float" || name == "float32") return PlyType::Float32;
    if (name == "double" || name == "float64") return PlyType::Float64;
    if (name == "uchar" || name == "uint8") return PlyType::UChar;
    if (name == "char" || name == "int8") return PlyType::Char;
    if (name == "short" || name == "int16") return PlyType::Int16;
    if (name == "ushort" || name == "uint16") return PlyType::UInt16;
    if (name == "int" || name == "int32") return PlyType::Int32;
    if (name == "uint" || name == "uint32") return PlyType::UInt32;
    throw LoadError("ply: unsupported property type '" + name + "' in " + path.string());
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    std::size_t offset = 0; // byte offset within a vertex record
};

struct PlyHeader {
    std::size_t vertex_count = 0;
    std::size_t stride = 0;
    std::vector<PlyProperty> properties;

    const PlyProperty* find(const std::string& name) const {
        for (const auto& p : properties) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }
};

PlyHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) {
        throw LoadError("ply: missing magic in " + path.string());
    }

    PlyHeader header;
    bool in_vertex_element = false;
    bool format_ok = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") {
                throw LoadError("ply: only binary_little_endian is supported, got '" + fmt +
                                "' in " + path.string());
            }
            format_ok = true;
        } else if (tok == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                header.vertex_count = count;
                in_vertex_element = true;
            } else {
                // Faces or other elements would change the payload layout.
                throw LoadError("ply: unsupported element '" + name + "' in " + path.string());
            }
        } else if (tok == "property") {
            if (!in_vertex_element) {
                throw LoadError("ply: property outside vertex element in " + path.string());
            }
            std::string type_name, prop_name;
            ls >> type_name;
            if (type_name == "list") {
                throw LoadError("ply: list properties are not supported in " + path.string());
            }
            ls >> prop_name;
            PlyProperty p;
            p.name = prop_name;
            p.type = parse_type(type_name, path);
            p.offset = header.stride;
            header.stride += type_size(p.type);
            header.properties.push_back(p);
        } else if (tok == "end_header") {
            if (!format_ok) throw LoadError("ply: missing format line in " + path.string());
            return header;
        } else if (!tok.empty()) {
            throw LoadError("ply: unrecognized header line '" + line + "' in " + path.string());
        }
    }
    throw LoadError("ply: truncated header in " + path.string());
}

double decode(const unsigned char* base, const PlyProperty& p) {
    switch (p.type) {
        case PlyType::Float32: {
            float v;
            std::memcpy(&v, base + p.offset, 4);
            return v;
        }
        case PlyType::Float64: {
            double v;
            std::memcpy(&v, base + p.offset, 8);
            return v;
        }
        case PlyType::UChar: return base[p.offset];
        case PlyType::Char: return static_cast<signed char>(base[p.offset]);
        case PlyType::Int16: {
            int16_t v;
            std::memcpy(&v, base + p.offset, 2);
            return v;
        }
        case PlyType::UInt16: {
            uint16_t v;
            std::memcpy(&v, base + p.offset, 2);
            return v;
        }
        case PlyType::Int32: {
            int32_t v;
            std::memcpy(&v, base + p.offset, 4);
            return v;
        }
        case PlyType::UInt32: {
            uint32_t v;
            std::memcpy(&v, base + p.offset, 4);
            return v;
        }
    }
    return 0.0;
}

std::vector<unsigned char> read_payload(std::ifstream& in, const PlyHeader& header,
                                        const std::filesystem::path& path) {
    std::vector<unsigned char> payload(header.vertex_count * header.stride);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw LoadError("ply: truncated payload in " + path.string());
    }
    return payload;
}

void require_properties(const PlyHeader& header, const std::vector<std::string>& names,
                        const std::filesystem::path& path) {
    std::string missing;
    for (const auto& n : names) {
        if (!header.find(n)) missing += missing.empty() ? n : (", " + n);
    }
    if (!missing.empty()) {
        throw LoadError("ply: missing required properties [" + missing + "] in " + path.string());
    }
}

const char* kCheckpointProps[] = {"x",     "y",     "z",     "scale_0", "scale_1",
                                  "scale_2", "rot_0", "rot_1", "rot_2",   "rot_3",
                                  "opacity", "f_dc_0", "f_dc_1", "f_dc_2"};

} // namespace

void save_checkpoint(const GaussianCloud& cloud, const std::filesystem::path& path) {
    cloud.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("save_checkpoint: cannot open for writing: " + path.string());

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    for (const char* name : kCheckpointProps) {
        out << "property double " << name << "\n";
    }
    out << "end_header\n";

    std::vector<double> row(14);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        row[0] = cloud.positions[i].x();
        row[1] = cloud.positions[i].y();
        row[2] = cloud.positions[i].z();
        row[3] = cloud.log_scales[i].x();
        row[4] = cloud.log_scales[i].y();
        row[5] = cloud.log_scales[i].z();
        row[6] = cloud.rotations[i][0];
        row[7] = cloud.rotations[i][1];
        row[8] = cloud.rotations[i][2];
        row[9] = cloud.rotations[i][3];
        row[10] = cloud.opacity_logits[i];
        row[11] = cloud.colors_raw[i].x();
        row[12] = cloud.colors_raw[i].y();
        row[13] = cloud.colors_raw[i].z();
        out.write(reinterpret_cast<const char*>(row.data()), 14 * sizeof(double));
    }
    if (!out) throw LoadError("save_checkpoint: write failed: " + path.string());
}

GaussianCloud load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("load_checkpoint: cannot open: " + path.string());

    const PlyHeader header = read_header(in, path);
    require_properties(header,
                       std::vector<std::string>(std::begin(kCheckpointProps),
                                                std::end(kCheckpointProps)),
                       path);
    const std::vector<unsigned char> payload = read_payload(in, header, path);

    const PlyProperty* props[14];
    for (int k = 0; k < 14; ++k) props[k] = header.find(kCheckpointProps[k]);

    GaussianCloud cloud;
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        const unsigned char* base = payload.data() + i * header.stride;
        double v[14];
        for (int k = 0; k < 14; ++k) v[k] = decode(base, *props[k]);
        cloud.push_back({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8], v[9]}, v[10],
                        {v[11], v[12], v[13]});
    }
    cloud.validate();
    return cloud;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("load_point_cloud: cannot open: " + path.string());

    const PlyHeader header = read_header(in, path);
    require_properties(header, {"x", "y", "z"}, path);
    const bool uchar_colors = header.find("red") && header.find("green") && header.find("blue");
    if (!uchar_colors) {
        throw LoadError("ply: missing required properties [red, green, blue] in " +
                        path.string());
    }
    const std::vector<unsigned char> payload = read_payload(in, header, path);

    const PlyProperty* px = header.find("x");
    const PlyProperty* py = header.find("y");
    const PlyProperty* pz = header.find("z");
    const PlyProperty* pr = header.find("red");
    const PlyProperty* pg = header.find("green");
    const PlyProperty* pb = header.find("blue");
    const bool bytes = pr->type == PlyType::UChar;

    PointCloud pc;
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        const unsigned char* base = payload.data() + i * header.stride;
        pc.positions.push_back({decode(base, *px), decode(base, *py), decode(base, *pz)});
        Vec3 c(decode(base, *pr), decode(base, *pg), decode(base, *pb));
        if (bytes) c /= 255.0;
        pc.colors.push_back(c);
    }
    return pc;
}

void save_point_cloud(const PointCloud& points, const std::filesystem::path& path) {
    if (points.positions.size() != points.colors.size()) {
        throw ValidationError("save_point_cloud: positions and colors differ in length");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("save_point_cloud: cannot open for writing: " + path.string());

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << points.positions.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "end_header\n";

    for (std::size_t i = 0; i < points.positions.size(); ++i) {
        double xyz[3] = {points.positions[i].x(), points.positions[i].y(),
                         points.positions[i].z()};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        unsigned char rgb[3];
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(points.colors[i][c], 0.0, 1.0);
            rgb[c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
    }
    if (!out) throw LoadError("save_point_cloud: write failed: " + path.string());
}

} // namespace splat
