#ifndef ORBITSHIFT_SRC_VENDOR_JSON_HPP
#define ORBITSHIFT_SRC_VENDOR_JSON_HPP

#include <json.hpp>

#endif
