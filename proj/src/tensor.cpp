#include "mmreg/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mmreg {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
    for (auto v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace mmreg
