#!/usr/bin/env python


try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup


readme = open('README.rst').read()
history = open('HISTORY.rst').read().replace('.. :changelog:', '')

requirements = [
    'numpy>=1.22',
    'Pillow>=9.1',
    'opencv-python-headless>=4.5',
    'tqdm',
]

test_requirements = [
    'pytest',
]

setup(
    name='quadtex',
    version='0.1.0',
    description='Textures on quad-mesh hierarchies: generation, rendering and single-image transfer',
    long_description=readme + '\n\n' + history,
    author='quadtex developers',
    author_email='quadtex@users.noreply.github.com',
    packages=[
        'quadtex',
    ],
    package_dir={'quadtex':
                 'quadtex'},
    package_data={'quadtex': ['data/*.json']},
    include_package_data=True,
    install_requires=requirements,
    entry_points={
        'console_scripts': ['quadtex=quadtex.cli:main'],
    },
    license="Apache 2",
    zip_safe=False,
    keywords=['mesh', 'texture', 'neural field', 'differentiable rendering', 'style transfer'],
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Topic :: Multimedia :: Graphics :: 3D Rendering',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    python_requires='>=3.8',
    test_suite='tests',
    tests_require=test_requirements
)
