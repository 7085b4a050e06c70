#include "vaxcov/estimate_table.hpp"

#include <fstream>

#include "vaxcov/csv.hpp"
#include "vaxcov/errors.hpp"

namespace vaxcov {

void write_estimates_csv(const EstimateTable& table, const std::filesystem::path& path,
                         const std::string& unit_column) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << unit_column << ",vaccine,time,mean,2.5%,50%,97.5%,prediction\n";
  for (const auto& r : table.rows) {
    out << csv::join({r.unit, r.vaccine, std::to_string(r.year), csv::format_double(r.mean),
                      csv::format_double(r.q025), csv::format_double(r.q50),
                      csv::format_double(r.q975), r.is_prediction ? "1" : "0"})
        << '\n';
  }
  if (!out) throw IoError("error writing file: " + path.string());
}

EstimateTable read_estimates_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  if (table.header.size() != 8 || table.header[1] != "vaccine" || table.header[2] != "time") {
    throw ParseError(path.string(), 1, "not an estimates table");
  }
  EstimateTable out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    EstimateRow e;
    e.unit = row[0];
    e.vaccine = row[1];
    const auto year = csv::to_int(row[2]);
    if (!year) throw ParseError(path.string(), line, "bad time value '" + row[2] + "'");
    e.year = *year;
    double* slots[] = {&e.mean, &e.q025, &e.q50, &e.q975};
    for (int c = 0; c < 4; ++c) {
      const auto v = csv::to_double(row[3 + c]);
      if (!v) throw ParseError(path.string(), line, "bad number '" + row[3 + c] + "'");
      *slots[c] = *v;
    }
    if (row[7] != "0" && row[7] != "1") throw ParseError(path.string(), line, "bad prediction flag");
    e.is_prediction = row[7] == "1";
    out.rows.push_back(std::move(e));
  }
  return out;
}

}  // namespace vaxcov
