"""
🌀 nhicyl.common

Contains internal resources used commonly throughout the `nhicyl`
package (logging, caching & the error hierarchy).
"""
