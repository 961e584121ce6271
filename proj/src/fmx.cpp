#include "oodlab/fmx.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace oodlab {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'X', '1'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U value = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) value |= static_cast<U>(static_cast<U>(p[b]) << (8 * b));
  return value;
}

double element(const FmxArray& a, std::size_t i) {
  const std::uint8_t* p = a.payload.data() + i * dtype_size(a.dtype);
  switch (a.dtype) {
    case DType::F32: return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    case DType::F64: return std::bit_cast<double>(get_le<std::uint64_t>(p));
    case DType::I32: return static_cast<double>(static_cast<std::int32_t>(get_le<std::uint32_t>(p)));
  }
  return 0.0;
}

void push_element(std::vector<std::uint8_t>& out, DType t, double v) {
  switch (t) {
    case DType::F32: put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
    case DType::F64: put_le(out, std::bit_cast<std::uint64_t>(v)); break;
    case DType::I32: put_le(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v))); break;
  }
}

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  if (s == "i32") return DType::I32;
  fail(ErrorKind::Schema, "unknown dtype '" + s + "'");
}

std::uint32_t crc(const std::vector<std::uint8_t>& bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t len = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = crc32(c, bytes.data() + off, static_cast<uInt>(len));
    off += len;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(DType t) noexcept {
  switch (t) {
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::I32: return "i32";
  }
  return "?";
}

std::size_t dtype_size(DType t) noexcept { return t == DType::F64 ? 8 : 4; }

std::size_t FmxArray::element_count() const {
  std::size_t n = 1;
  for (std::int64_t d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

Matrix FmxArray::as_matrix() const {
  require(shape.size() == 2, ErrorKind::Schema, "'" + name + "' is not a 2-D array");
  Matrix m(shape[0], shape[1]);
  std::size_t i = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = element(*this, i++);
  }
  return m;
}

Vector FmxArray::as_vector() const {
  require(shape.size() == 1, ErrorKind::Schema, "'" + name + "' is not a 1-D array");
  Vector v(shape[0]);
  for (Index i = 0; i < v.size(); ++i) v[i] = element(*this, static_cast<std::size_t>(i));
  return v;
}

Labels FmxArray::as_labels() const {
  require(shape.size() == 1 && dtype == DType::I32, ErrorKind::Schema, "'" + name + "' is not a 1-D i32 array");
  Labels out(static_cast<std::size_t>(shape[0]));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(element(*this, i));
  return out;
}

std::vector<Matrix> FmxArray::as_passes() const {
  require(shape.size() == 3, ErrorKind::Schema, "'" + name + "' is not a 3-D array");
  std::vector<Matrix> out;
  std::size_t i = 0;
  for (std::int64_t t = 0; t < shape[0]; ++t) {
    Matrix m(shape[1], shape[2]);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = element(*this, i++);
    }
    out.push_back(std::move(m));
  }
  return out;
}

void validate_schema(const FmxArray& a) {
  const std::string& r = a.role;
  std::size_t rank = 0;
  bool integer = false;
  if (r == "features" || r == "logits" || r == "embeddings" || r == "weights") rank = 2;
  else if (r == "bias" || r == "scores") rank = 1;
  else if (r == "labels") rank = 1, integer = true;
  else if (r == "passes") rank = 3;
  else fail(ErrorKind::Schema, "unknown role '" + r + "'");
  require(a.shape.size() == rank, ErrorKind::Schema,
          "role '" + r + "' needs a " + std::to_string(rank) + "-D array, got " + std::to_string(a.shape.size()) + "-D");
  require(integer == (a.dtype == DType::I32), ErrorKind::Schema,
          "role '" + r + "' cannot carry dtype " + std::string(to_string(a.dtype)));
  for (std::int64_t d : a.shape) require(d >= 0, ErrorKind::Schema, "negative extent in shape");
}

FmxArray make_fmx(const Matrix& m, std::string role, DType dtype, std::string dataset_id, std::string name) {
  FmxArray a;
  a.name = name.empty() ? role : std::move(name);
  a.role = std::move(role);
  a.dtype = dtype;
  a.dataset_id = std::move(dataset_id);
  a.shape = {m.rows(), m.cols()};
  a.payload.reserve(a.element_count() * dtype_size(dtype));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) push_element(a.payload, dtype, m(r, c));
  }
  return a;
}

FmxArray make_fmx(const Vector& v, std::string role, DType dtype, std::string dataset_id, std::string name) {
  FmxArray a;
  a.name = name.empty() ? role : std::move(name);
  a.role = std::move(role);
  a.dtype = dtype;
  a.dataset_id = std::move(dataset_id);
  a.shape = {v.size()};
  for (Index i = 0; i < v.size(); ++i) push_element(a.payload, dtype, v[i]);
  return a;
}

FmxArray make_fmx(const Labels& labels, std::string dataset_id, std::string name) {
  FmxArray a;
  a.name = name.empty() ? "labels" : std::move(name);
  a.role = "labels";
  a.dtype = DType::I32;
  a.dataset_id = std::move(dataset_id);
  a.shape = {static_cast<std::int64_t>(labels.size())};
  for (int y : labels) push_element(a.payload, DType::I32, y);
  return a;
}

FmxArray make_fmx(const std::vector<Matrix>& passes, DType dtype, std::string dataset_id, std::string name) {
  require(!passes.empty(), ErrorKind::InvalidInput, "cannot store an empty pass stack");
  FmxArray a;
  a.name = name.empty() ? "passes" : std::move(name);
  a.role = "passes";
  a.dtype = dtype;
  a.dataset_id = std::move(dataset_id);
  a.shape = {static_cast<std::int64_t>(passes.size()), passes.front().rows(), passes.front().cols()};
  for (const Matrix& m : passes) {
    require(m.rows() == passes.front().rows() && m.cols() == passes.front().cols(), ErrorKind::InvalidInput,
            "pass shapes differ");
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) push_element(a.payload, dtype, m(r, c));
    }
  }
  return a;
}

std::vector<std::uint8_t> encode_fmx(const FmxArray& a) {
  validate_schema(a);
  require(a.payload.size() == a.element_count() * dtype_size(a.dtype), ErrorKind::Schema,
          "payload length does not match shape");
  nlohmann::json header = {
      {"name", a.name},           {"dtype", std::string(to_string(a.dtype))},
      {"shape", a.shape},         {"byte_order", "LE"},
      {"layout", "row-major"},    {"role", a.role},
      {"dataset_id", a.dataset_id}, {"checksum", crc(a.payload)},
  };
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), a.payload.begin(), a.payload.end());
  return out;
}

FmxArray decode_fmx(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::CorruptFile,
          origin + ": not an FMX container");
  const std::uint64_t header_len = get_le<std::uint64_t>(bytes.data() + 4);
  require(header_len <= bytes.size() - 12, ErrorKind::CorruptFile, origin + ": truncated header");
  const std::string text(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptFile, origin + ": unreadable header (" + e.what() + ")");
  }
  FmxArray a;
  try {
    a.name = header.at("name").get<std::string>();
    a.dtype = parse_dtype(header.at("dtype").get<std::string>());
    a.shape = header.at("shape").get<std::vector<std::int64_t>>();
    a.role = header.at("role").get<std::string>();
    a.dataset_id = header.value("dataset_id", std::string{});
    require(header.value("byte_order", std::string{"LE"}) == "LE", ErrorKind::Schema, origin + ": byte order must be LE");
    require(header.value("layout", std::string{"row-major"}) == "row-major", ErrorKind::Schema,
            origin + ": layout must be row-major");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, origin + ": malformed header (" + e.what() + ")");
  }
  validate_schema(a);
  const std::size_t expected = a.element_count() * dtype_size(a.dtype);
  const std::size_t available = bytes.size() - 12 - static_cast<std::size_t>(header_len);
  require(available == expected, ErrorKind::CorruptFile,
          origin + ": payload holds " + std::to_string(available) + " bytes, shape needs " + std::to_string(expected));
  a.payload.assign(bytes.end() - static_cast<std::ptrdiff_t>(expected), bytes.end());
  if (header.contains("checksum")) {
    require(header["checksum"].get<std::uint32_t>() == crc(a.payload), ErrorKind::CorruptFile,
            origin + ": checksum mismatch");
  }
  return a;
}

void write_fmx(const FmxArray& array, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_fmx(array);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "short write to '" + path.string() + "'");
}

FmxArray read_fmx(const std::filesystem::path& path) { return decode_fmx(read_all(path), path.string()); }

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      require(first, ErrorKind::Schema, path.string() + ": non-numeric cell in '" + line + "'");
      first = false;
      continue;
    }
    first = false;
    require(rows.empty() || row.size() == rows.front().size(), ErrorKind::Schema,
            path.string() + ": ragged row '" + line + "'");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::Schema, path.string() + ": no numeric rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

namespace {
bool is_csv(const std::filesystem::path& path) { return path.extension() == ".csv"; }
}  // namespace

Matrix load_matrix(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorKind::Io, "missing file '" + path.string() + "'");
  if (is_csv(path)) return read_csv_matrix(path);
  return read_fmx(path).as_matrix();
}

Vector load_vector(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorKind::Io, "missing file '" + path.string() + "'");
  if (is_csv(path)) {
    const Matrix m = read_csv_matrix(path);
    require(m.cols() == 1 || m.rows() == 1, ErrorKind::Schema, path.string() + ": expected a single column");
    return m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
  }
  return read_fmx(path).as_vector();
}

Labels load_labels(const std::filesystem::path& path) {
  if (is_csv(path)) {
    const Vector v = load_vector(path);
    Labels out(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) {
      require(v[i] == std::round(v[i]), ErrorKind::Schema, path.string() + ": labels must be integers");
      out[static_cast<std::size_t>(i)] = static_cast<int>(v[i]);
    }
    return out;
  }
  require(std::filesystem::exists(path), ErrorKind::Io, "missing file '" + path.string() + "'");
  return read_fmx(path).as_labels();
}

}  // namespace oodlab
