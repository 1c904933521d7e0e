#include "hrfnet/srm.hpp"

#include <nlohmann/json.hpp>

namespace hrfnet {

int FilterBank::max_side() const noexcept {
  int side = 0;
  for (const auto& k : kernels) side = std::max(side, k.side);
  return side;
}

void FilterBank::validate() const {
  if (kernels.empty()) throw Error(ErrorKind::Config, "filter bank: no kernels");
  if (!(truncation_threshold > 0.0)) {
    throw Error(ErrorKind::Config, "filter bank: truncation threshold must be > 0");
  }
  for (const auto& k : kernels) {
    if (k.side < 1 || k.side % 2 == 0) {
      throw Error(ErrorKind::Config, "filter bank: kernel '" + k.name + "' must have odd side");
    }
    if (k.coefficients.size() != static_cast<std::size_t>(k.side) * k.side) {
      throw Error(ErrorKind::Config, "filter bank: kernel '" + k.name + "' is not square");
    }
    if (k.divisor == 0.0) throw Error(ErrorKind::Config, "filter bank: zero divisor in '" + k.name + "'");
    double sum = 0.0;
    for (double c : k.coefficients) sum += c;
    if (sum != 0.0) throw Error(ErrorKind::Config, "filter bank: kernel '" + k.name + "' is not zero-sum");
  }
}

FilterBank srm_kernels() {
  FilterBank bank;
  bank.truncation_threshold = 2.0;
  bank.kernels.push_back({"kv5",
                          5,
                          {-1, 2, -2, 2, -1,   //
                           2, -6, 8, -6, 2,    //
                           -2, 8, -12, 8, -2,  //
                           2, -6, 8, -6, 2,    //
                           -1, 2, -2, 2, -1},
                          12.0});
  bank.kernels.push_back({"second_order3",
                          3,
                          {-1, 2, -1,  //
                           2, -4, 2,   //
                           -1, 2, -1},
                          4.0});
  // horizontal third-order residual  X(j-1) - 3X(j) + 3X(j+1) - X(j+2), embedded in 5x5
  bank.kernels.push_back({"third_order5",
                          5,
                          {0, 0, 0, 0, 0,    //
                           0, 0, 0, 0, 0,    //
                           0, 1, -3, 3, -1,  //
                           0, 0, 0, 0, 0,    //
                           0, 0, 0, 0, 0},
                          3.0});
  return bank;
}

std::string FilterBank::to_json() const {
  nlohmann::json j;
  j["truncation_threshold"] = truncation_threshold;
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : kernels) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < k.side; ++r) {
      rows.push_back(std::vector<double>(k.coefficients.begin() + r * k.side,
                                         k.coefficients.begin() + (r + 1) * k.side));
    }
    j["kernels"].push_back({{"name", k.name}, {"divisor", k.divisor}, {"grid", rows}});
  }
  return j.dump(2);
}

FilterBank FilterBank::from_json(const std::string& text) {
  FilterBank bank;
  try {
    const auto j = nlohmann::json::parse(text);
    bank.truncation_threshold = j.at("truncation_threshold").get<double>();
    for (const auto& jk : j.at("kernels")) {
      SrmKernel k;
      k.name = jk.at("name").get<std::string>();
      k.divisor = jk.at("divisor").get<double>();
      const auto& rows = jk.at("grid");
      k.side = static_cast<int>(rows.size());
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != k.side) {
          throw Error(ErrorKind::Config, "filter bank: kernel '" + k.name + "' is not square");
        }
        for (const auto& v : row) k.coefficients.push_back(v.get<double>());
      }
      bank.kernels.push_back(std::move(k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("filter bank: ") + e.what());
  }
  bank.validate();
  return bank;
}

}  // namespace hrfnet
