#pragma once

#include "camspoof/analytics.hpp"
#include "camspoof/cli.hpp"
#include "camspoof/attacker.hpp"
#include "camspoof/byte_io.hpp"
#include "camspoof/defense.hpp"
#include "camspoof/detectors.hpp"
#include "camspoof/error.hpp"
#include "camspoof/gvsp.hpp"
#include "camspoof/pixel.hpp"
#include "camspoof/scenario.hpp"
#include "camspoof/scene.hpp"
#include "camspoof/sign_detect.hpp"
#include "camspoof/sim.hpp"
#include "camspoof/vision.hpp"
