#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "auv/npy.hpp"

namespace auv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape of a feature volume: channels x depth x height x width.
struct VolumeShape {
    std::size_t channels = 0;
    std::size_t depth = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t channel_size() const noexcept { return depth * plane(); }
    std::size_t size() const noexcept { return channels * channel_size(); }
    std::array<std::size_t, 4> dims() const noexcept {
        return {channels, depth, height, width};
    }
    bool operator==(const VolumeShape&) const = default;
};

/// Decoded (C, D, H, W) representation of one image from a frozen extractor.
/// Channel c carries the features of class `class_ids()[c]`. Values are kept
/// in 64-bit whatever the on-disk precision.
class FeatureVolume {
public:
    FeatureVolume(std::string sample_id, std::vector<int> class_ids,
                  VolumeShape shape, std::vector<double> data);

    const std::string& sample_id() const noexcept { return sample_id_; }
    const std::vector<int>& class_ids() const noexcept { return class_ids_; }
    const VolumeShape& shape() const noexcept { return shape_; }
    std::span<const double> data() const noexcept { return data_; }

    /// Contiguous D*H*W slab for channel index `c`.
    std::span<const double> channel(std::size_t c) const;
    /// Channel index holding `class_id`; throws ClassError if absent.
    std::size_t channel_of(int class_id) const;
    bool has_class(int class_id) const noexcept;

private:
    std::string sample_id_;
    std::vector<int> class_ids_;
    VolumeShape shape_;
    std::vector<double> data_;
};

/// z_c laid out as D rows by H*W columns.
struct ClassFeatureMatrix {
    int class_id = 0;
    RowMatrix data;
    bool centered = false;

    Eigen::Index rows() const noexcept { return data.rows(); }
    Eigen::Index cols() const noexcept { return data.cols(); }
};

/// Loads a (C, D, H, W) tensor file. The sample id is the file stem. When
/// `class_ids` is empty the channels are labelled 0..C-1.
FeatureVolume load_feature_volume(const std::filesystem::path& path,
                                  std::vector<int> class_ids = {});

void save_feature_volume(const FeatureVolume& volume,
                         const std::filesystem::path& path,
                         npy::Dtype dtype = npy::Dtype::float32);

/// Reshapes the channel of `class_id` into a D x (H*W) matrix, subtracting
/// each row's mean when `center` is set.
ClassFeatureMatrix class_matrix(const FeatureVolume& volume, int class_id,
                                bool center = true);

}  // namespace auv
