#include "facesculpt/blobio.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian; big-endian hosts are unsupported");

namespace facesculpt {

using nlohmann::json;

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::runtime_error("blobio: negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

void BlobWriter::add(const std::string& name, std::vector<int> shape, const double* data) {
    Entry e;
    e.name = name;
    e.shape = std::move(shape);
    e.data.assign(data, data + shape_numel(e.shape));
    entries_.push_back(std::move(e));
}

void BlobWriter::add(const std::string& name, std::vector<int> shape,
                     const std::vector<double>& data) {
    if (data.size() != shape_numel(shape))
        throw std::runtime_error("blobio: data size does not match shape for '" + name + "'");
    add(name, std::move(shape), data.data());
}

void BlobWriter::set_meta(const std::string& json_text) { meta_json_ = json_text; }

void BlobWriter::write(const std::string& json_path, const std::string& bin_path) const {
    json manifest;
    manifest["format"] = "facesculpt-blob-v1";
    manifest["dtype"] = "f64le";
    manifest["bin"] = std::filesystem::path(bin_path).filename().string();
    json arrays = json::array();
    std::size_t offset = 0;
    for (const auto& e : entries_) {
        json a;
        a["name"] = e.name;
        a["shape"] = e.shape;
        a["offset"] = offset;
        arrays.push_back(a);
        offset += e.data.size() * sizeof(double);
    }
    manifest["arrays"] = arrays;
    manifest["meta"] = meta_json_.empty() ? json::object() : json::parse(meta_json_);

    std::ofstream jf(json_path);
    if (!jf) throw std::runtime_error("blobio: cannot open " + json_path + " for writing");
    jf << manifest.dump(2) << "\n";

    std::ofstream bf(bin_path, std::ios::binary);
    if (!bf) throw std::runtime_error("blobio: cannot open " + bin_path + " for writing");
    for (const auto& e : entries_) {
        bf.write(reinterpret_cast<const char*>(e.data.data()),
                 static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    }
    if (!bf) throw std::runtime_error("blobio: write failed for " + bin_path);
}

struct BlobReader::Impl {
    json manifest;
    std::vector<double> blob;
};

BlobReader::BlobReader(const std::string& json_path) : impl_(new Impl) {
    std::ifstream jf(json_path);
    if (!jf) throw std::runtime_error("blobio: cannot open " + json_path);
    jf >> impl_->manifest;
    if (impl_->manifest.value("format", "") != "facesculpt-blob-v1")
        throw std::runtime_error("blobio: " + json_path + ": unrecognized manifest format");

    const auto bin_name = impl_->manifest.at("bin").get<std::string>();
    const auto bin_path = std::filesystem::path(json_path).parent_path() / bin_name;
    std::ifstream bf(bin_path, std::ios::binary | std::ios::ate);
    if (!bf) throw std::runtime_error("blobio: cannot open " + bin_path.string());
    const std::size_t bytes = static_cast<std::size_t>(bf.tellg());
    if (bytes % sizeof(double) != 0)
        throw std::runtime_error("blobio: " + bin_path.string() + ": truncated blob");
    impl_->blob.resize(bytes / sizeof(double));
    bf.seekg(0);
    bf.read(reinterpret_cast<char*>(impl_->blob.data()), static_cast<std::streamsize>(bytes));
    if (!bf) throw std::runtime_error("blobio: read failed for " + bin_path.string());
}

BlobReader::~BlobReader() { delete impl_; }

bool BlobReader::has(const std::string& name) const {
    for (const auto& a : impl_->manifest.at("arrays"))
        if (a.at("name").get<std::string>() == name) return true;
    return false;
}

std::vector<int> BlobReader::shape(const std::string& name) const {
    for (const auto& a : impl_->manifest.at("arrays"))
        if (a.at("name").get<std::string>() == name) return a.at("shape").get<std::vector<int>>();
    throw std::runtime_error("blobio: no array named '" + name + "'");
}

std::vector<double> BlobReader::array(const std::string& name) const {
    for (const auto& a : impl_->manifest.at("arrays")) {
        if (a.at("name").get<std::string>() != name) continue;
        const auto shp = a.at("shape").get<std::vector<int>>();
        const std::size_t offset = a.at("offset").get<std::size_t>() / sizeof(double);
        const std::size_t n = shape_numel(shp);
        if (offset + n > impl_->blob.size())
            throw std::runtime_error("blobio: array '" + name + "' exceeds blob size");
        return std::vector<double>(impl_->blob.begin() + static_cast<std::ptrdiff_t>(offset),
                                   impl_->blob.begin() + static_cast<std::ptrdiff_t>(offset + n));
    }
    throw std::runtime_error("blobio: no array named '" + name + "'");
}

std::string BlobReader::meta_text() const {
    if (!impl_->manifest.contains("meta")) return "{}";
    return impl_->manifest.at("meta").dump();
}

}  // namespace facesculpt
