#pragma once

#include "ventronav/error.hpp"
#include "ventronav/geometry.hpp"
#include "ventronav/mesh.hpp"
#include "ventronav/mesh_io.hpp"
#include "ventronav/landmarks.hpp"
#include "ventronav/registration.hpp"
#include "ventronav/icp.hpp"
#include "ventronav/acquisition.hpp"
#include "ventronav/guidance.hpp"
#include "ventronav/session.hpp"
#include "ventronav/serialization.hpp"
#include "ventronav/scenario.hpp"
#include "ventronav/phantom.hpp"
#include "ventronav/report.hpp"
#include "ventronav/study.hpp"
