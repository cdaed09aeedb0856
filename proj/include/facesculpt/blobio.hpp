#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace facesculpt {

// Model artifacts are stored as a JSON manifest plus a flat little-endian
// float64 binary blob. The manifest lists named arrays with shapes and byte
// offsets into the blob; free-form metadata rides along in "meta".
class BlobWriter {
public:
    void add(const std::string& name, std::vector<int> shape, const double* data);
    void add(const std::string& name, std::vector<int> shape, const std::vector<double>& data);

    // Arbitrary JSON metadata merged into the manifest under "meta".
    void set_meta(const std::string& json_text);

    // json_path gets the manifest; the blob lands next to it at bin_path.
    // bin_path is recorded in the manifest relative to the manifest's directory.
    void write(const std::string& json_path, const std::string& bin_path) const;

private:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<double> data;
    };
    std::vector<Entry> entries_;
    std::string meta_json_;
};

class BlobReader {
public:
    explicit BlobReader(const std::string& json_path);
    ~BlobReader();

    bool has(const std::string& name) const;
    std::vector<int> shape(const std::string& name) const;
    std::vector<double> array(const std::string& name) const;
    // Raw manifest "meta" object as JSON text ("{}" when absent).
    std::string meta_text() const;

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace facesculpt
