#include "eafpmed/shape.hpp"

#include "eafpmed/errors.hpp"

namespace eafpmed {

Shape::Shape(std::initializer_list<int> dims) {
    if (dims.size() > 4) {
        throw ShapeError("shape: rank " + std::to_string(dims.size()) + " exceeds maximum rank 4");
    }
    for (int d : dims) {
        if (d <= 0) {
            throw ShapeError("shape: extent " + std::to_string(d) + " at axis " +
                             std::to_string(rank_) + " must be positive");
        }
        dims_[static_cast<std::size_t>(rank_++)] = d;
    }
}

int Shape::operator[](int axis) const {
    if (axis < 0 || axis >= rank_) {
        throw ShapeError("shape: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank_));
    }
    return dims_[static_cast<std::size_t>(axis)];
}

std::int64_t Shape::numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[static_cast<std::size_t>(i)];
    return n;
}

std::string Shape::str() const {
    std::string s = "(";
    for (int i = 0; i < rank_; ++i) {
        if (i) s += ',';
        s += std::to_string(dims_[static_cast<std::size_t>(i)]);
    }
    s += ')';
    return s;
}

}  // namespace eafpmed
