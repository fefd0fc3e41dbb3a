#include "auv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "auv/errors.hpp"

namespace auv {

FeatureVolume::FeatureVolume(std::string sample_id, std::vector<int> class_ids,
                             VolumeShape shape, std::vector<double> data)
    : sample_id_(std::move(sample_id)),
      class_ids_(std::move(class_ids)),
      shape_(shape),
      data_(std::move(data)) {
    if (shape_.channels < 1 || shape_.depth < 1)
        throw ShapeError("feature volume needs C >= 1 and D >= 1");
    if (shape_.plane() < 2)
        throw ShapeError("feature volume needs H*W >= 2");
    if (class_ids_.size() != shape_.channels)
        throw ShapeError("sample " + sample_id_ + ": " +
                         std::to_string(class_ids_.size()) + " class ids for " +
                         std::to_string(shape_.channels) + " channels");
    if (data_.size() != shape_.size())
        throw ShapeError("feature volume data length does not match its shape");
    auto sorted = class_ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ClassError("sample " + sample_id_ + " has duplicate class ids");
    for (double v : data_)
        if (!std::isfinite(v))
            throw DataError("sample " + sample_id_ + " contains non-finite values");
}

std::span<const double> FeatureVolume::channel(std::size_t c) const {
    if (c >= shape_.channels)
        throw ShapeError("channel index out of range");
    return std::span<const double>(data_).subspan(c * shape_.channel_size(),
                                                  shape_.channel_size());
}

bool FeatureVolume::has_class(int class_id) const noexcept {
    return std::find(class_ids_.begin(), class_ids_.end(), class_id) != class_ids_.end();
}

std::size_t FeatureVolume::channel_of(int class_id) const {
    auto it = std::find(class_ids_.begin(), class_ids_.end(), class_id);
    if (it == class_ids_.end())
        throw ClassError("sample " + sample_id_ + " has no class " +
                         std::to_string(class_id));
    return static_cast<std::size_t>(it - class_ids_.begin());
}

FeatureVolume load_feature_volume(const std::filesystem::path& path,
                                  std::vector<int> class_ids) {
    auto array = npy::read(path);
    if (array.shape.size() != 4)
        throw ShapeError(path.string() + ": expected a rank-4 tensor, got rank " +
                         std::to_string(array.shape.size()));
    VolumeShape shape{array.shape[0], array.shape[1], array.shape[2], array.shape[3]};
    if (class_ids.empty()) {
        class_ids.resize(shape.channels);
        std::iota(class_ids.begin(), class_ids.end(), 0);
    }
    return FeatureVolume(path.stem().string(), std::move(class_ids), shape,
                         std::move(array.data));
}

void save_feature_volume(const FeatureVolume& volume,
                         const std::filesystem::path& path, npy::Dtype dtype) {
    const auto dims = volume.shape().dims();
    npy::write(path, dims, volume.data(), dtype);
}

ClassFeatureMatrix class_matrix(const FeatureVolume& volume, int class_id,
                                bool center) {
    const auto slab = volume.channel(volume.channel_of(class_id));
    const auto rows = static_cast<Eigen::Index>(volume.shape().depth);
    const auto cols = static_cast<Eigen::Index>(volume.shape().plane());

    ClassFeatureMatrix m;
    m.class_id = class_id;
    m.data = Eigen::Map<const RowMatrix>(slab.data(), rows, cols);
    m.centered = center;
    if (center)
        m.data.colwise() -= m.data.rowwise().mean();
    return m;
}

}  // namespace auv
