#include "lcnn/fixtures.hpp"

#include <algorithm>
#include <sstream>

namespace lcnn {

namespace {

Fixture conv_fixture(std::string id, std::string network, std::uint32_t n,
                     std::uint32_t c_out, std::uint32_t hw, std::uint32_t f,
                     std::uint32_t c_in, std::uint32_t stride,
                     std::uint32_t pad) {
  Fixture fx;
  fx.id = std::move(id);
  fx.kind = FixtureKind::Conv;
  fx.network = std::move(network);
  fx.n = n;
  fx.c = c_in;
  fx.h = fx.w = hw;
  fx.c_out = c_out;
  fx.f = f;
  fx.stride = stride;
  fx.pad = pad;
  return fx;
}

Fixture pool_fixture(std::string id, std::string network, std::uint32_t n,
                     std::uint32_t hw, std::uint32_t win, std::uint32_t c,
                     std::uint32_t stride) {
  Fixture fx;
  fx.id = std::move(id);
  fx.kind = FixtureKind::Pool;
  fx.network = std::move(network);
  fx.n = n;
  fx.c = c;
  fx.h = fx.w = hw;
  fx.win = win;
  fx.pool_stride = stride;
  fx.mode = PoolMode::Max;
  return fx;
}

Fixture class_fixture(std::string id, std::string network, std::uint32_t n,
                      std::uint32_t categories) {
  Fixture fx;
  fx.id = std::move(id);
  fx.kind = FixtureKind::Classifier;
  fx.network = std::move(network);
  fx.n = n;
  fx.c = categories;
  fx.h = fx.w = 1;
  return fx;
}

// Padding is not part of the published table; layers whose networks keep the
// map extent (the 5x5 LeNet/Cifar stacks, the 3x3 stride-1 ZFNet/VGG stacks)
// get pad = floor(f/2), the strided ones get none.
std::vector<Fixture> build_table() {
  std::vector<Fixture> t;
  t.push_back(conv_fixture("CV1", "lenet", 128, 16, 28, 5, 1, 1, 2));
  t.push_back(conv_fixture("CV2", "lenet", 128, 16, 14, 5, 16, 1, 2));
  t.push_back(pool_fixture("PL1", "lenet", 128, 28, 2, 16, 2));
  t.push_back(pool_fixture("PL2", "lenet", 128, 14, 2, 16, 2));
  t.push_back(class_fixture("CLASS1", "lenet", 128, 10));

  t.push_back(conv_fixture("CV3", "cifar10", 128, 64, 24, 5, 3, 1, 2));
  t.push_back(conv_fixture("CV4", "cifar10", 128, 64, 12, 5, 64, 1, 2));
  t.push_back(pool_fixture("PL3", "cifar10", 128, 24, 3, 64, 2));
  t.push_back(pool_fixture("PL4", "cifar10", 128, 12, 3, 64, 2));
  t.push_back(class_fixture("CLASS2", "cifar10", 128, 10));

  t.push_back(pool_fixture("PL5", "alexnet", 128, 55, 3, 96, 2));
  t.push_back(pool_fixture("PL6", "alexnet", 128, 27, 3, 192, 2));
  t.push_back(pool_fixture("PL7", "alexnet", 128, 13, 3, 256, 2));
  t.push_back(class_fixture("CLASS3", "alexnet", 128, 1000));

  t.push_back(conv_fixture("CV5", "zfnet", 64, 96, 224, 3, 3, 2, 0));
  t.push_back(conv_fixture("CV6", "zfnet", 64, 256, 55, 5, 96, 2, 0));
  t.push_back(conv_fixture("CV7", "zfnet", 64, 384, 13, 3, 256, 1, 1));
  t.push_back(conv_fixture("CV8", "zfnet", 64, 384, 13, 3, 384, 1, 1));
  t.push_back(pool_fixture("PL8", "zfnet", 64, 110, 3, 96, 2));
  t.push_back(pool_fixture("PL9", "zfnet", 64, 26, 3, 256, 2));
  t.push_back(pool_fixture("PL10", "zfnet", 64, 13, 3, 256, 2));
  t.push_back(class_fixture("CLASS4", "zfnet", 64, 1000));

  t.push_back(conv_fixture("CV9", "vgg", 32, 64, 224, 3, 3, 1, 1));
  t.push_back(conv_fixture("CV10", "vgg", 32, 256, 56, 3, 128, 1, 1));
  t.push_back(conv_fixture("CV11", "vgg", 32, 512, 28, 3, 256, 1, 1));
  t.push_back(conv_fixture("CV12", "vgg", 32, 512, 14, 3, 512, 1, 1));
  t.push_back(class_fixture("CLASS5", "vgg", 32, 1000));
  return t;
}

}  // namespace

const std::vector<Fixture>& fixture_table() {
  static const std::vector<Fixture> table = build_table();
  return table;
}

std::optional<Fixture> fixture_by_id(std::string_view id) {
  for (const Fixture& fx : fixture_table()) {
    if (fx.id == id) return fx;
  }
  return std::nullopt;
}

Fixture scale_fixture(const Fixture& fx, std::uint32_t scale) {
  if (scale <= 1) return fx;
  Fixture scaled = fx;
  scaled.n = std::max<std::uint32_t>(1, fx.n / scale);
  if (fx.kind != FixtureKind::Classifier) {
    scaled.h = std::min<std::uint32_t>(fx.h, 64);
    scaled.w = std::min<std::uint32_t>(fx.w, 64);
  }
  return scaled;
}

std::string fixture_list_csv(std::uint32_t scale) {
  std::ostringstream out;
  out << "id,kind,network,n,c,h,w,c_out,f,stride,pad,win,pool_stride,mode,"
         "categories\n";
  for (const Fixture& base : fixture_table()) {
    const Fixture fx = scale_fixture(base, scale);
    out << fx.id << ',';
    switch (fx.kind) {
      case FixtureKind::Conv:
        out << "conv," << fx.network << ',' << fx.n << ',' << fx.c << ','
            << fx.h << ',' << fx.w << ',' << fx.c_out << ',' << fx.f << ','
            << fx.stride << ',' << fx.pad << ",,,,";
        break;
      case FixtureKind::Pool:
        out << "pool," << fx.network << ',' << fx.n << ',' << fx.c << ','
            << fx.h << ',' << fx.w << ",,,,," << fx.win << ','
            << fx.pool_stride << ','
            << (fx.mode == PoolMode::Max ? "max" : "average") << ',';
        break;
      case FixtureKind::Classifier:
        out << "class," << fx.network << ',' << fx.n << ",,,,,,,,,,,"
            << fx.c;
        break;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lcnn
