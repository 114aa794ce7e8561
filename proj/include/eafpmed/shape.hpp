#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>

namespace eafpmed {

// Dense row-major extent list, rank 0..4. Rank-0 is a scalar with numel 1.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> dims);

    static Shape scalar() { return Shape{}; }
    static Shape nchw(int n, int c, int h, int w) { return Shape{n, c, h, w}; }

    int rank() const { return rank_; }
    int operator[](int axis) const;
    std::int64_t numel() const;

    bool operator==(const Shape& other) const = default;

    std::string str() const;  // e.g. "(1,3,64,64)"

private:
    std::array<int, 4> dims_{0, 0, 0, 0};
    int rank_ = 0;
};

}  // namespace eafpmed
