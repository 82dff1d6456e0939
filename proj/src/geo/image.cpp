#include "smart/geo/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace smart::geo {

Image::Image(long rows_, long cols_, std::uint8_t fill)
    : rows(rows_), cols(cols_), pixels(std::size_t(rows_ * cols_ * 3), fill) {}

void Image::sample(double r, double c, double out[3]) const {
  r = std::clamp(r, 0.0, double(rows - 1));
  c = std::clamp(c, 0.0, double(cols - 1));
  const long r0 = std::min(long(std::floor(r)), rows > 1 ? rows - 2 : 0);
  const long c0 = std::min(long(std::floor(c)), cols > 1 ? cols - 2 : 0);
  const long r1 = std::min(r0 + 1, rows - 1), c1 = std::min(c0 + 1, cols - 1);
  const double fr = r - r0, fc = c - c0;
  for (long ch = 0; ch < 3; ++ch) {
    out[ch] = (1 - fr) * ((1 - fc) * at(r0, c0, ch) + fc * at(r0, c1, ch)) +
              fr * ((1 - fc) * at(r1, c0, ch) + fc * at(r1, c1, ch));
  }
}

static Image from_mat(const cv::Mat& bgr, const std::string& what) {
  if (bgr.empty()) throw FetchError("image decode failed: " + what);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image img(rgb.rows, rgb.cols);
  for (long r = 0; r < img.rows; ++r)
    std::copy_n(rgb.ptr<std::uint8_t>(int(r)), img.cols * 3,
                img.pixels.data() + r * img.cols * 3);
  return img;
}

Image Image::load_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  return from_mat(m, path);
}

Image Image::decode(const std::vector<std::uint8_t>& bytes) {
  cv::Mat buf(1, int(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat m = cv::imdecode(buf, cv::IMREAD_COLOR);
  return from_mat(m, "in-memory payload");
}

std::vector<std::uint8_t> Image::encode_png() const {
  cv::Mat rgb(int(rows), int(cols), CV_8UC3, const_cast<std::uint8_t*>(pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<uchar> out;
  if (!cv::imencode(".png", bgr, out)) throw FetchError("png encode failed");
  return {out.begin(), out.end()};
}

void Image::save_png(const std::string& path) const {
  const auto bytes = encode_png();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw FetchError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Image Image::resize_bilinear(long new_rows, long new_cols) const {
  Image out(new_rows, new_cols);
  const double sr = double(rows) / double(new_rows);
  const double sc = double(cols) / double(new_cols);
  double px[3];
  for (long r = 0; r < new_rows; ++r) {
    const double src_r = (r + 0.5) * sr - 0.5;
    for (long c = 0; c < new_cols; ++c) {
      sample(src_r, (c + 0.5) * sc - 0.5, px);
      for (long ch = 0; ch < 3; ++ch)
        out.at(r, c, ch) = std::uint8_t(std::lround(std::clamp(px[ch], 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace smart::geo
