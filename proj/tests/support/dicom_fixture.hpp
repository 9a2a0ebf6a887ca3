#pragma once

// Writes small synthetic DICOM slices for ingest tests.

#include <gdcmAttribute.h>
#include <gdcmImageWriter.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

struct DicomSliceSpec {
  std::string patient = "P001";
  std::string modality = "CT";
  std::string description;
  std::string series_uid = "1.2.3.4";
  double z = 0.0;
  int rows = 8;
  int cols = 8;
  double slope = 1.0;
  double intercept = -1024.0;
  std::vector<std::int16_t> stored;  // rows * cols stored values
  bool with_position = true;
};

inline void write_dicom(const std::filesystem::path& path, const DicomSliceSpec& s) {
  std::filesystem::create_directories(path.parent_path());
  gdcm::ImageWriter writer;
  gdcm::Image& image = writer.GetImage();
  image.SetNumberOfDimensions(2);
  image.SetDimension(0, static_cast<unsigned>(s.cols));
  image.SetDimension(1, static_cast<unsigned>(s.rows));
  image.SetPixelFormat(gdcm::PixelFormat(gdcm::PixelFormat::INT16));
  image.SetPhotometricInterpretation(gdcm::PhotometricInterpretation::MONOCHROME2);
  image.SetSlope(s.slope);
  image.SetIntercept(s.intercept);
  image.SetSpacing(0, 0.7);
  image.SetSpacing(1, 0.7);
  if (s.with_position) {
    image.SetOrigin(0, 0.0);
    image.SetOrigin(1, 0.0);
    image.SetOrigin(2, s.z);
  }

  gdcm::DataElement pixels(gdcm::Tag(0x7fe0, 0x0010));
  pixels.SetByteValue(reinterpret_cast<const char*>(s.stored.data()),
                      static_cast<std::uint32_t>(s.stored.size() * sizeof(std::int16_t)));
  image.SetDataElement(pixels);

  gdcm::DataSet& ds = writer.GetFile().GetDataSet();
  const auto put = [&](std::uint16_t g, std::uint16_t e, const std::string& v) {
    gdcm::DataElement de(gdcm::Tag(g, e));
    std::string padded = v;
    if (padded.size() % 2) padded += ' ';
    de.SetByteValue(padded.data(), static_cast<std::uint32_t>(padded.size()));
    ds.Replace(de);
  };
  put(0x0008, 0x0060, s.modality);
  put(0x0010, 0x0020, s.patient);
  put(0x0020, 0x000e, s.series_uid);
  if (!s.description.empty()) put(0x0008, 0x103e, s.description);
  put(0x0018, 0x0050, "1.5");
  if (s.modality == "CT") put(0x0008, 0x0016, "1.2.840.10008.5.1.4.1.1.2");
  else put(0x0008, 0x0016, "1.2.840.10008.5.1.4.1.1.4");
  writer.SetFileName(path.c_str());
  if (!writer.Write()) throw std::runtime_error("cannot write DICOM fixture " + path.string());
}

}  // namespace fixture
