#include <cmath>

#include <gtest/gtest.h>

#include "mrr/device.hpp"
#include "mrr/error.hpp"

using namespace mrr;
using namespace mrr::device;

TEST(CombLine, IdentityAtReference) {
  RingDevice d;
  EXPECT_EQ(comb_line_frequency_thz(d, 0, d.reference_temperature_k), d.pump_frequency_thz);
}

TEST(CombLine, ThermalShiftOneKelvin) {
  RingDevice d;
  const double f = comb_line_frequency_thz(d, 0, d.reference_temperature_k + 1);
  EXPECT_NEAR((f - d.pump_frequency_thz) * 1e3, -2.75, 1e-9);
}

TEST(CombLine, OneFsrUp) {
  RingDevice d;
  const double f = comb_line_frequency_thz(d, 1, d.reference_temperature_k);
  EXPECT_NEAR((f - d.pump_frequency_thz) * 1e3, 192.37, 1e-9);
}

TEST(Device, LinewidthAndCoherenceTime) {
  RingDevice d;  // Q 4.6e5 at 192.5 THz
  EXPECT_NEAR(linewidth_mhz(d), 210.0, 0.05 * 210.0);
  EXPECT_NEAR(coherence_time_ps(d), 760.0, 0.05 * 760.0);
  EXPECT_NEAR(coherence_time_ps(d) * linewidth_mhz(d) * 2 * M_PI * 1e-6, 1.0, 1e-12);
  d.q_factor = 1.1e5;
  EXPECT_NEAR(coherence_time_ps(d), 180.0, 5.0);
}

TEST(Device, RejectsBadFields) {
  RingDevice d;
  d.q_factor = 0;
  try {
    d.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("q_factor"), std::string::npos);
  }
}

TEST(Grid, ItuCentres) {
  DwdmGrid g;
  EXPECT_DOUBLE_EQ(g.channel_center_thz(25), 192.5);
  EXPECT_NEAR(thz_to_nm(g.channel_center_thz(25)), 1557.36, 0.01);
  EXPECT_TRUE(g.is_occupied(23));
  EXPECT_FALSE(g.is_occupied(24));
  EXPECT_NEAR(nm_to_thz(thz_to_nm(193.1)), 193.1, 1e-12);
}

TEST(Grid, CombLineWavelengths) {
  RingDevice d;
  d.pump_frequency_thz = nm_to_thz(1557.43);  // pump tuned off the ch25 centre
  const double T = d.reference_temperature_k;
  EXPECT_NEAR(thz_to_nm(comb_line_frequency_thz(d, -1, T)), 1558.98, 0.05);
  EXPECT_NEAR(thz_to_nm(comb_line_frequency_thz(d, 1, T)), 1555.88, 0.05);
}

TEST(Match, PumpOnGrid) {
  RingDevice d;
  DwdmGrid g;
  const auto m = match_comb_to_grid(d, g, -2, 2, d.reference_temperature_k);
  ASSERT_EQ(m.size(), 5u);
  const int ch[] = {21, 23, 25, 27, 29};
  const double det[] = {15.26, 7.63, 0.0, -7.63, -15.26};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(m[i].k, i - 2);
    EXPECT_EQ(m[i].channel, ch[i]);
    EXPECT_NEAR(m[i].detuning_ghz, det[i], 1e-6);
    EXPECT_LE(std::abs(m[i].detuning_ghz), g.channel_spacing_ghz / 2);
  }
}

TEST(Match, AntisymmetricDetuning) {
  RingDevice d;
  DwdmGrid g;
  const auto m = match_comb_to_grid(d, g, -6, 6, d.reference_temperature_k);
  for (int k = 1; k <= 6; ++k)
    EXPECT_NEAR(m[6 + k].detuning_ghz, -m[6 - k].detuning_ghz, 1e-6) << k;
}

TEST(Match, EmptyRange) {
  EXPECT_THROW(match_comb_to_grid(RingDevice{}, DwdmGrid{}, 2, 1, 298.15), Error);
}

TEST(TemperatureShift, Examples) {
  RingDevice d;
  EXPECT_EQ(required_temperature_shift(d, 0.0), 0.0);
  EXPECT_EQ(required_temperature_shift(d, -2.75), 1.0);
  EXPECT_NEAR(required_temperature_shift(d, -7.63), 2.7745, 1e-3);
  d.thermal_tuning_ghz_per_k = 0;
  EXPECT_THROW(required_temperature_shift(d, 1.0), Error);
}

TEST(ChannelPair, SymmetricAboutPump) {
  RingDevice d;
  DwdmGrid g;
  for (int k = 1; k <= 3; ++k) {
    const auto p = make_channel_pair(d, g, k, 300.0);
    const double fs = comb_line_frequency_thz(d, -k, 300.0);
    const double fi = comb_line_frequency_thz(d, k, 300.0);
    EXPECT_NEAR(0.5 * (fs + fi), comb_line_frequency_thz(d, 0, 300.0), 1e-12);
    EXPECT_EQ(p.comb_order, k);
  }
  const auto p = make_channel_pair(d, g, 1, d.reference_temperature_k);
  EXPECT_EQ(p.signal_channel, 23);
  EXPECT_EQ(p.idler_channel, 27);
}

TEST(ChannelPair, RejectsBadTransmission) {
  ChannelPair p;
  p.transmission_idler = 1.5;
  EXPECT_THROW(p.validate(), Error);
  p.transmission_idler = 0.5;
  p.a_signal = -1;
  EXPECT_THROW(p.validate(), Error);
}
